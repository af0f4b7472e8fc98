"""Small reverse-mode autodiff core with fused LSTM kernels."""
from . import ops
from .checkpoint import CheckpointError, load_arrays, load_params, save_arrays, save_params
from .gradcheck import GradCheckReport, grad_check
from .kernels import BACKEND
from .lstm import LSTMParams, lstm_sequence, lstm_step
from .ops import op_set
from .optim import Adam, MissingGradient, optimizer_step
from .params import ParamStore
from .tensor import ShapeMismatch, Tensor, as_tensor, default_dtype, no_grad, using_dtype

__all__ = [
    "ops", "op_set", "Tensor", "as_tensor", "no_grad", "using_dtype", "default_dtype",
    "ShapeMismatch", "ParamStore", "Adam", "MissingGradient", "optimizer_step",
    "grad_check", "GradCheckReport", "lstm_step", "lstm_sequence", "LSTMParams",
    "save_arrays", "load_arrays", "save_params", "load_params", "CheckpointError", "BACKEND",
]
