//! Quality assessment toolkit for omnidirectional (360°) video coding.
//!
//! The crate covers the whole batch pipeline:
//!
//! * [`media_io`]: raw I420 frames, viewing-direction traces, subjective scores,
//!   sequence manifests, persisted forest models and weight-map caches.
//! * [`sphere`]: equirectangular pixel/direction mapping, viewport rendering and
//!   membership, cube-face regions.
//! * [`weight`]: the viewing-direction GMM prior and the viewport-pooled weight maps.
//! * [`saliency`]: phase-spectrum quaternion Fourier saliency on viewport images.
//! * [`gaze`]: candidate extraction, features, random forest, and trajectory prediction.
//! * [`metrics`]: PSNR/SSIM and their non-content and content weighted variants.
//! * [`scores`]: difference scores, Z-scores, subject rejection, O-DMOS and V-DMOS.
//! * [`analysis`]: trace statistics and heat maps.
//! * [`eval`]: logistic fitting and SRCC/PCC/RMSE/MAE.
//! * [`cli`]: the `omnivqa` command line front end.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gaze;
pub mod media_io;
pub mod metrics;
pub mod saliency;
pub mod scores;
pub mod sphere;
pub mod weight;

pub use error::{Error, Result};
pub use media_io::Frame;
pub use sphere::SphereDirection;
