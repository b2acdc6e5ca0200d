//! Statistics, curve fitting and clustering for city-level comparison.

pub mod expfit;
pub mod kmeans;
pub mod stats;

pub use expfit::{fit_exponential, ExpFit};
pub use kmeans::{elbow_curve, kmeans, KMeansResult};
pub use stats::{mean, median, pearson, percentile_nearest, quantile_linear, std_population, zscore};
