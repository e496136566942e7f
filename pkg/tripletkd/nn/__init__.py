from tripletkd.nn.architectures import build_preset, preset_names, register_preset
from tripletkd.nn.checkpoint import load_checkpoint, save_checkpoint
from tripletkd.nn.model import Model, ParamStore, count_params, infer_shapes

__all__ = [
    "Model",
    "ParamStore",
    "build_preset",
    "count_params",
    "infer_shapes",
    "load_checkpoint",
    "preset_names",
    "register_preset",
    "save_checkpoint",
]
