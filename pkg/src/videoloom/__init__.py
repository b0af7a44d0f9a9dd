"""Desk-scale sliding-window co-denoising for long-video editing.

Long clips are denoised as overlapping temporal windows that are advanced
independently each ODE step and blended back with a Hamming taper, which
caps memory at the window footprint while runtime stays linear in length.
A small trainable denoiser plus low-rank adapters and a dual-region loss
stand in for a foundation model, so every numerical claim stays testable
on a desk.
"""

from .conditioning import (ConditionedField, EditRequest, build_context,
                           run_edit, run_edit_full)
from .core import (LatentSequence, LvtError, NoiseSchedule, as_tensor,
                   make_rng, make_schedule, read_lvt, write_lvt)
from .denoisers import (GaussianOracle, IdentityCodec, PooledCodec,
                        ToyDenoiser, load_checkpoint, save_checkpoint)
from .lora import AdaptedDenoiser, LoraAdapter, attach, merge_weight
from .masks import (MaskVolume, PadSpec, apply_mask, border_mask,
                    interior_mask, pad_for_outpaint, sample_border_mask,
                    sample_interior_mask)
from .metrics import MetricReport, evaluate_sequence, psnr, region_mse, ssim
from .orchestrator import CoDenoiseConfig, RunStats, codenoise, scaling_probe
from .solvers import (StepReport, convergence_study, euler_step, heun_step,
                      midpoint_step, paper_step, solve)
from .training import (ClipDistribution, SyntheticClipSpec, TrainConfig,
                       dual_loss, grad_dual_loss, make_synthetic_clip, train)
from .windowing import (HammingWeights, WindowPlan, blend_windows,
                        extract_window, hamming_weights, plan_windows)

__version__ = "0.1.0"
