"""Configuration, training loop, benchmark protocols, reports and the CLI."""

from .benchmark import build_split, run_ablation, run_benchmark
from .config import RunConfig, load_config
from .metrics import accuracy, aggregate, compute_metrics, harmonic_mean
from .report import MetricsReport, emit_report, load_report, render_table
from .surrogate import PretrainConfig, get_surrogate, pretrain_surrogate
from .training import TrainData, TrainResult, evaluate, train_prompts

run_training = train_prompts
