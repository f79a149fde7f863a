//! Modal state estimation from sparse, noisy point measurements.
//!
//! Given a high-dimensional state u ∈ ℝᴺ that lives (approximately) in the
//! span of an orthonormal modal basis Φ ∈ ℝᴺˣⁿ, and k pointwise measurements
//! y = Sᵀu + η selected by a sensor matrix S, this crate provides:
//!
//! * two coefficient estimators — deterministic minimum-norm least squares
//!   m̂ = (SᵀΦ)⁺y and the Gaussian-Bayesian MAP estimate
//!   m̂ = Γ_post (SᵀΦ)ᵀ Γ_noise⁻¹ y — with a-priori relative-error bounds
//!   ([`estimate`]);
//! * the Bayes-risk theory that quantifies the gap between them: the risk
//!   premium Risk(m_LS) − Risk(m_MAP) = δ_prior + δ_noise, its computable
//!   upper bounds ζ_prior and ζ_noise, and Monte Carlo validation ([`risk`]);
//! * four sensor-placement algorithms — column-pivoted QR on Φᵀ, greedy
//!   D-optimal with fast rank-1 updates, exhaustive D-optimal, and CPQR on
//!   the prior-regularized basis — plus placement diagnostics ([`placement`]);
//! * a harmonic benchmark dataset, snapshot I/O, POD basis and data-driven
//!   prior construction, and reproducible experiment sweeps
//!   ([`datasets`], [`pod`], [`experiments`]);
//! * the dense linear-algebra kernels all of the above rest on, with
//!   explicit deterministic contracts ([`numerics`]).
//!
//! Every stochastic operation is a pure function of its inputs and a 64-bit
//! seed; substream splitting rules are documented where they apply.

pub mod datasets;
pub mod estimate;
pub mod experiments;
pub mod numerics;
pub mod placement;
pub mod pod;
pub mod risk;
