mod analyze;
mod fit;
mod report;
mod selftest;
mod simulate;

pub use analyze::{analyze, AnalysisReport, AxisHistogram, VolumeAnalysis};
pub use fit::{fit, FitEntry, FitStatus, FitSummary, WidthRatio};
pub use report::{report, CountRatio, ReportSummary, RunSummary};
pub use selftest::selftest;
pub use simulate::{simulate, PoleExcess, SimulationSummary};
