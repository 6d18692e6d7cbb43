"""Self-supervised physics-guided unrolled reconstruction for 3D multi-coil MRI.

The package covers the full desk-scale pipeline on simulated data:
phantom + acquisition simulation, mask generation and theta/lambda
splitting, the unrolled CG/ResNet network with its own reverse-mode
autodiff, training, conventional baselines, metrics and a CLI.
"""

from ._tuning import tune_malloc as _tune_malloc

_tune_malloc()

from . import autodiff
from .autodiff import Tensor, backward, no_grad
from .baselines import cs_recon, zero_filled
from .config import RunConfig, load_config
from .dataio import TrainingSample, load_dataset, save_dataset
from .fft import fft3_centered, fft_axis, ifft3_centered, ifft_axis
from .kernels import BACKEND as KERNEL_BACKEND
from .kernels import conv3d
from .losses import normalized_l1l2_loss, ssdu_loss, supervised_loss
from .metrics import nmse, psnr, ssim
from .mri import CoilSet, EncodingOperator, adjoint, encode, estimate_coil_maps
from .network import (
    DcProblem,
    ResNetConfig,
    UnrolledParams,
    dc_solve,
    load_checkpoint,
    reconstruct,
    regularizer_apply,
    save_checkpoint,
    unrolled_forward,
)
from .optim import AdamState, adam_step
from .phantom import (
    AcquisitionSpec,
    PhantomSpec,
    generate_coils,
    generate_phantom,
    simulate_acquisition,
)
from .sampling import (
    MaskSplit,
    SamplingMask,
    SplitConfig,
    extract_subvolumes,
    generate_mask,
    retrospective_subsample,
    split_gaussian,
)
from .training import TrainReport, train

__version__ = "0.1.0"
