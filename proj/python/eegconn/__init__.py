"""EEG connectivity analysis, channel selection and workload classification."""

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    Recording,
    __version__,
    bandpass,
    bandstop,
    binary_metrics,
    config_hash,
    connectivity_matrix,
    default_config,
    difficulty_weights,
    fast_ica,
    generate_cohort,
    load_recording,
    macro_metrics,
    pcc,
    run_command,
    save_recording,
    welch_psd,
)

COMMANDS = ("synth", "preprocess", "connect", "select", "label", "train", "evaluate", "report")


def run_pipeline(out, config=None, stamp=True, commands=COMMANDS):
    """Run the commands in order into the run directory `out`."""
    for c in commands:
        run_command(c, str(out), config, stamp)


__all__ = [name for name in dir() if not name.startswith("_")]
