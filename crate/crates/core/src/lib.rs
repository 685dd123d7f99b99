//! Land-use/land-cover analytics for multiband rasters.
//!
//! The pipeline: read a multiband scene and labeled points ([`io`]), fit a
//! Gaussian maximum-likelihood classifier and produce a class map
//! ([`classify`]), draw stratified validation points ([`sampling`]), score them
//! in a confusion matrix ([`accuracy`]), and compare yearly maps per region
//! ([`change`]). [`spectral`] computes NDVI-style indices, [`chart`] and
//! [`report`] render results, and [`synth`] builds scenes with known truth.
//!
//! Pixel loops run over row blocks in parallel when the `parallel` feature is
//! enabled; see [`exec::Workers`].

pub mod accuracy;
pub mod change;
pub mod chart;
pub mod classify;
pub mod error;
pub mod exec;
pub mod io;
pub mod raster;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod synth;

pub use accuracy::{confusion_matrix, ConfusionMatrix};
pub use change::{
    change_series, class_area, percent_change, transition_matrix, zonal_class_area, ChangeReport, PercentChange,
    TransitionMatrix, ZonalAreaTable,
};
pub use classify::{
    extract_training, knn_predict, predict, train_max_likelihood, FeatureMatrix, GaussianClassModel, LabeledSample,
    Ridge,
};
pub use error::{Error, Result};
pub use exec::Workers;
pub use raster::{
    rasterize_polygon, ClassLegend, ClassMap, DType, GeoTransform, RasterData, RasterGrid, RegionPolygon,
};
pub use sampling::{stratified_random_points, SamplePlan};
pub use spectral::{ndvi, normalized_difference, IndexRaster};
pub use synth::{generate_scene, stripe_scene_spec, SceneSpec};
