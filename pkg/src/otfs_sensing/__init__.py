"""Radar-sensing-aided OTFS channel estimation for massive MIMO."""
from .config import ExperimentConfig, load_config
from .dd_channel import PathParams, apply_time_channel, dd_channel_tensor, quantize_path, to_angle
from .otfs_modem import CommConfig, FrameLayout, build_frame, demodulate, extract_observations, modulate
from .radar import RadarConfig, RadarPath, derived_params, process_cube, synthesize_cube
from .recovery import ls_known_support, nmse, omp, radar_aided_omp
from .sensing_bridge import SupportSet, peaks_to_support
from .sparse_problem import psi_oracle, to_angle_domain

__all__ = [
    "CommConfig", "ExperimentConfig", "FrameLayout", "PathParams", "RadarConfig", "RadarPath",
    "SupportSet", "apply_time_channel", "build_frame", "dd_channel_tensor", "demodulate",
    "derived_params", "extract_observations", "load_config", "ls_known_support", "modulate", "nmse",
    "omp", "peaks_to_support", "process_cube", "psi_oracle", "quantize_path", "radar_aided_omp",
    "synthesize_cube", "to_angle", "to_angle_domain",
]
__version__ = "0.1.0"
