use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Domain generator rejected the requested geometry.
    Geometry(String),
    /// A mesh failed a structural invariant (orientation, markers, adjacency).
    InvalidMesh(String),
    /// A deformation produced a non-positive element; carries the element index.
    ElementInversion {
        element: usize,
        area: f64,
    },
    /// A quality or assembly routine hit a degenerate element.
    DegenerateElement {
        element: usize,
    },
    /// No material assigned for a subdomain id present in the mesh.
    MissingMaterial {
        subdomain: u32,
    },
    /// Invalid material parameters (needs mu > 0 and lambda + mu > 0).
    InvalidMaterial {
        subdomain: u32,
        lambda: f64,
        mu: f64,
    },
    /// Krylov solver exceeded its iteration budget.
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// Krylov recurrence broke down (scalar denominator vanished).
    Breakdown {
        what: &'static str,
    },
    /// Coarse-level (or direct) LU factorization hit a zero pivot.
    SingularMatrix {
        pivot: usize,
    },
    /// Bad configuration value.
    Config(String),
    /// File format violation while reading a mesh.
    Parse {
        line: usize,
        message: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::ElementInversion { element, area } => {
                write!(f, "element {element} inverted (signed area {area:.3e})")
            }
            Error::DegenerateElement { element } => {
                write!(f, "element {element} is degenerate")
            }
            Error::MissingMaterial { subdomain } => {
                write!(f, "no material for subdomain {subdomain}")
            }
            Error::InvalidMaterial {
                subdomain,
                lambda,
                mu,
            } => write!(
                f,
                "invalid Lame pair ({lambda}, {mu}) for subdomain {subdomain}"
            ),
            Error::NonConvergence {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge in {iterations} iterations (residual {residual:.3e})"
            ),
            Error::Breakdown { what } => write!(f, "{what} breakdown"),
            Error::SingularMatrix { pivot } => {
                write!(f, "singular matrix (zero pivot at {pivot})")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
