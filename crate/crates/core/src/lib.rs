pub mod bench;
pub mod construct;
pub mod kernel;
pub mod model;
pub mod node;
pub mod oracle;
pub mod query;
pub mod tree;
pub mod update;

pub use construct::{BuildConfig, BuildError, LayoutPolicy};
pub use kernel::{Kernel, SimdMode};
pub use model::{BoundingBox, CoordKey, Point, RangeQuery, Schema};
pub use node::{Layout, LeafKind};
pub use tree::{SkdTree, StructureStats};
pub use query::{KnnResult, Neighbor, QueryStats, RangeOptions};
pub use update::{DeleteOutcome, InsertError, InsertOutcome};
