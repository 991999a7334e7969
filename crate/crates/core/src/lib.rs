pub mod data;
pub mod error;
pub mod experiments;
pub mod geodesic;
pub mod gp;
pub mod io;
pub mod jacobian;
pub mod manifold;
pub mod measure;
pub mod metric;
pub mod randmat;
pub mod specfun;

pub use error::{Error, Result};
pub use jacobian::JacobianPosterior;
pub use manifold::{AffineMap, LatentMap, SphereMap};
pub use metric::{MetricKind, MetricPoint};
