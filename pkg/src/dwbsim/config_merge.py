"""Merge CLI args with the scenario config."""

from __future__ import annotations

from dataclasses import replace

from dwbsim.models import ScenarioConfig

FULL_TRIALS = 1000


def merge_config_with_args(config: ScenarioConfig, args) -> ScenarioConfig:
    """Return a new ScenarioConfig with CLI args overriding config fields."""
    n_trials = config.n_trials
    if getattr(args, "full", False):
        n_trials = FULL_TRIALS
    if getattr(args, "trials", None) is not None:
        n_trials = args.trials
    return replace(
        config,
        seed=args.seed if getattr(args, "seed", None) is not None else config.seed,
        n_trials=n_trials,
        workers=args.workers if getattr(args, "workers", None) is not None else config.workers,
        output_dir=args.out_dir if getattr(args, "out_dir", None) is not None else config.output_dir,
    )
