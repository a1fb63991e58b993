//! Dependence measures for random objects living in semimetric spaces of
//! negative type.
//!
//! The crate implements metric covariance (mCov) in two algebraically
//! equivalent forms: the distance form built from squared distances under the
//! coupled and decoupled regimes, and the trace form built from a kernel.
//! Alongside it sit the Hilbert-Schmidt independence criterion (HSIC) and
//! distance covariance (dCov), which measure the full cross-covariance between
//! feature maps rather than only its trace.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel_metric`] | kernel and semimetric catalogue, Gram/distance matrices, kernel↔semimetric conversion, negative-type validation |
//! | [`estimators`] | V-statistic estimators and the permutation test |
//! | [`exact_oracle`] | exact population values on finite-support joints and Mercer decompositions |
//! | [`scenarios`] | the orthogonal-subspace and coupled-mixture counterexamples, power and level studies |
//! | [`io`] | CSV readers for paired samples and distance matrices |
//!
//! ```rust
//! use metricdep::estimators::{mcov_plugin, mcov_trace, PairedSample};
//! use metricdep::kernel_metric::{induced_kernel, Anchor, PointSet, SemimetricSpec};
//!
//! let x = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
//! let s = PairedSample::new(x.clone(), x).unwrap();
//! let d2 = SemimetricSpec::EuclideanSquared;
//! let k = induced_kernel(&d2, Anchor::Origin).unwrap();
//!
//! assert_eq!(mcov_plugin(&s, &d2).unwrap(), 0.25);
//! assert_eq!(mcov_trace(&s, &k).unwrap(), 0.25);
//! ```

pub mod error;
pub mod estimators;
pub mod exact_oracle;
pub mod io;
pub mod kernel_metric;
pub mod scenarios;
pub mod seeding;

pub use error::{Error, Result};
