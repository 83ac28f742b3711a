"""Distribution matching as a reinforcement-learning reward, at desk scale.

A few-step student generator is distilled from an analytic Gaussian-mixture
diffusion teacher whose scores and denoisers are exact. The distillation
signal is expressed as a per-dimension reward, group-normalized within sample
groups, fused with auxiliary rewards under adaptive weighting, and optimized
with a clipped importance-sampling surrogate.
"""

from .numerics import MlpArch, MlpGrad, MlpParams, RngStream
from .schedule import TimeGrid, coeffs, default_grid, forward_diffuse
from .teacher import (GmmSpec, gmm_sample, noisy_logdensity,
                      noisy_logdensity_score, posterior_mean_denoiser,
                      ring_spec)
from .nets import AdamConfig, NetState, fake_denoise, fake_score, generate_step
from .rewards import (beta_dm, external_reward, group_normalize, rdm_exact,
                      rdm_practice, score_difference, wdm_weight, weighted_add)
from .policy import GrpoConfig, TransitionBatch, grpo_surrogate
from .metrics import energy_distance, mode_coverage, rs_variance_curve
from .trainer import (AuxRewardSpec, RunSinks, TrainConfig, TrainerState,
                      evaluate, init_trainer_state, run, sample_student_x0)

__all__ = [
    "MlpArch", "MlpGrad", "MlpParams", "RngStream",
    "TimeGrid", "coeffs", "default_grid", "forward_diffuse",
    "GmmSpec", "gmm_sample", "noisy_logdensity", "noisy_logdensity_score",
    "posterior_mean_denoiser", "ring_spec",
    "AdamConfig", "NetState", "fake_denoise", "fake_score", "generate_step",
    "beta_dm", "external_reward", "group_normalize", "rdm_exact",
    "rdm_practice", "score_difference", "wdm_weight", "weighted_add",
    "GrpoConfig", "TransitionBatch", "grpo_surrogate",
    "energy_distance", "mode_coverage", "rs_variance_curve",
    "AuxRewardSpec", "RunSinks", "TrainConfig", "TrainerState",
    "evaluate", "init_trainer_state", "run", "sample_student_x0",
]

__version__ = "0.1.0"
