#
# MIT License
#
# Copyright (c) 2023 pseudo-marginal-glm-missing team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
#
"""Pseudo-marginal inference pipelines: simulate, run, tune, surface and diagnose."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .configuration import RunConfig, load_configuration
from .datasets.core import load_truth
from .diagnostics import (
    complete_case_mle,
    format_summary,
    missingness_report,
    rhat_exceeds,
    summarize,
    with_mle,
    with_truth,
    write_summary,
)
from .models.core import Dataset, ModelSpec
from .models.parameters import ParamVector
from .sampler import Trace, chain_seeds, initial_parameters, run_chain, run_exact_chain
from .simulation import simulate, write_simulation
from .tuning import SeedMode, SurfaceGrid, replicate_roughness, surface, tune

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# exit status of `diagnose` when an R-hat exceeds the threshold
RHAT_EXIT_STATUS = 2


class PseudoMarginalPipeline:
    """Pipelines of the command line, one method per subcommand.

    Every method receives the argument dataclasses as dictionaries keyed by their
    `__name__` and returns the exit status.
    """

    def load(self, common_args: Dict[str, Any]) -> RunConfig:
        """Load the configuration and apply the common overrides."""
        if common_args.get("config") is None:
            raise ValueError("a configuration is required, pass --config")
        config = load_configuration(common_args["config"])
        if common_args.get("seed") is not None:
            config.sampler.seed = int(common_args["seed"])
        if common_args.get("workers") is not None:
            config.sampler.workers = int(common_args["workers"])
        return config

    def load_data(self, config: RunConfig, common_args: Dict[str, Any]) -> Dataset:
        data = config.load_data(common_args.get("data"))
        report = missingness_report(data)
        for row in report.itertuples():
            logger.info(f"column {row.column}: {row.missing} missing ({row.percent:.1f}%)")
        return data

    def theta(self, config: RunConfig, spec: ModelSpec, theta_file: Optional[str]) -> ParamVector:
        """Fixed parameters: the configured initial values overridden by a parameter file."""
        values = config.init_values()
        if theta_file is not None:
            values.update(load_truth(theta_file))
        missing = set(spec.parameter_names) - set(values)
        if missing:
            raise ValueError(
                f"no value for {', '.join(sorted(missing))}, set `init` in the configuration or pass --theta_file"
            )
        return spec.param_vector({name: values[name] for name in spec.parameter_names})

    def simulate(self, common_args: Dict[str, Any], **kwargs) -> int:
        config = self.load(common_args)
        result = simulate(config, config.sampler.seed)
        write_simulation(result, config, common_args["out_dir"])
        return 0

    def run(self, common_args: Dict[str, Any], run_args: Dict[str, Any], **kwargs) -> int:
        """Run one or several chains and write their traces."""
        config = self.load(common_args)
        for name in ("iterations", "n_importance", "burn_in", "chains", "exact", "log_every"):
            if run_args.get(name) is not None:
                setattr(config.sampler, name, run_args[name])
        logger.info(f"Sampler arguments: {config.sampler.to_dict()}")
        data = self.load_data(config, common_args)
        spec = config.model_spec()
        prop = config.proposal_spec()
        out_dir = Path(common_args["out_dir"])
        settings = config.sampler
        for chain, seed in enumerate(chain_seeds(settings.seed, settings.chains)):
            init = initial_parameters(spec, seed, config.init_values())
            logger.info(f"chain {chain} - seed {seed} - initial values {init.as_dict()}")
            if settings.exact:
                trace = run_exact_chain(
                    data,
                    spec,
                    prop,
                    init,
                    settings.iterations,
                    seed,
                    enumeration_cap=settings.enumeration_cap,
                    burn_in=settings.burn_in,
                    log_every=settings.log_every,
                )
            else:
                trace = run_chain(
                    data,
                    spec,
                    prop,
                    init,
                    settings.iterations,
                    settings.n_importance,
                    seed,
                    workers=settings.workers,
                    burn_in=settings.burn_in,
                    log_every=settings.log_every,
                )
            path = out_dir / ("trace.csv" if settings.chains == 1 else f"trace_{chain}.csv")
            trace.write(path)
            logger.info(f"trace written to {path} - acceptance rate {trace.acceptance_rate:.3f}")
        return 0

    def tune(self, common_args: Dict[str, Any], tune_args: Dict[str, Any], **kwargs) -> int:
        """Variance of the log estimate over a grid of N, written to tuning.csv."""
        config = self.load(common_args)
        data = self.load_data(config, common_args)
        spec = config.model_spec()
        theta = self.theta(config, spec, tune_args.get("theta_file"))
        report = tune(
            data,
            spec,
            theta,
            tune_args["n_grid"],
            tune_args["replicates"],
            config.sampler.seed,
            workers=config.sampler.workers,
            threshold=tune_args["threshold"],
        )
        path = Path(common_args["out_dir"]) / "tuning.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"tuning report written to {path}")
        return 0

    def surface(self, common_args: Dict[str, Any], surface_args: Dict[str, Any], **kwargs) -> int:
        """Profile surface of the negative log estimate, written to surface.csv."""
        config = self.load(common_args)
        data = self.load_data(config, common_args)
        spec = config.model_spec()
        theta = self.theta(config, spec, surface_args.get("theta_file"))
        for name in ("range_a", "range_b"):
            if len(surface_args[name]) != 2:
                raise ValueError(f"{name} takes a lower and an upper bound, got {surface_args[name]}")
        steps = surface_args["steps"]
        grid = SurfaceGrid(
            surface_args["param_a"],
            surface_args["param_b"],
            tuple(surface_args["range_a"]),  # type: ignore
            tuple(surface_args["range_b"]),  # type: ignore
            steps,
            steps,
        )
        n_samples = surface_args.get("n_importance") or config.sampler.n_importance
        frame = surface(
            data,
            spec,
            theta,
            grid,
            n_samples,
            config.sampler.seed,
            seed_mode=SeedMode(surface_args["seed_mode"]),
            replicates=surface_args["replicates"],
            workers=config.sampler.workers,
        )
        for position, roughness in enumerate(replicate_roughness(frame, grid)):
            logger.info(f"roughness between replicates {position} and {position + 1}: {roughness:.4f}")
        path = Path(common_args["out_dir"]) / "surface.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"surface written to {path}")
        return 0

    def diagnose(self, common_args: Dict[str, Any], diagnose_args: Dict[str, Any], **kwargs) -> int:
        """Summarise a trace; status 2 when an R-hat exceeds the threshold."""
        out_dir = Path(common_args["out_dir"])
        config = self.load(common_args) if common_args.get("config") is not None else None
        trace_path = diagnose_args.get("trace") or out_dir / "trace.csv"
        trace = Trace.read(trace_path)
        burn_in = diagnose_args.get("burn_in")
        if burn_in is None:
            burn_in = config.sampler.burn_in if config is not None else trace.meta.burn_in
        threshold = diagnose_args.get("rhat_threshold")
        if threshold is None:
            threshold = config.sampler.rhat_threshold if config is not None else 1.1
        rows = summarize(trace, burn_in, diagnose_args["level"])
        if diagnose_args.get("truth_file") is not None:
            rows = with_truth(rows, load_truth(diagnose_args["truth_file"]))
        if diagnose_args.get("with_mle"):
            if config is None:
                raise ValueError("--with_mle needs the configuration of the data, pass --config")
            rows = with_mle(rows, complete_case_mle(self.load_data(config, common_args), config.model_spec()))
        path, _ = write_summary(rows, out_dir / "summary.csv", trace.acceptance_rate)
        logger.info(f"summary written to {path}\n{format_summary(rows, trace.acceptance_rate)}")
        exceeding = rhat_exceeds(rows, threshold)
        if exceeding:
            logger.warning(f"R-hat above {threshold} for {', '.join(exceeding)}")
            return RHAT_EXIT_STATUS
        return 0


@dataclass
class CommonArguments:
    """Arguments shared by every subcommand."""

    __name__ = "common_args"

    config: Optional[str] = field(
        default=None,
        metadata={"help": "YAML configuration of the model, a path or the name of a shipped configuration."},
    )
    seed: Optional[int] = field(
        default=None,
        metadata={"help": "Root seed, overrides the configuration."},
    )
    workers: Optional[int] = field(
        default=None,
        metadata={"help": "Threads evaluating the importance samples, overrides the configuration."},
    )
    out_dir: str = field(
        default="output",
        metadata={"help": "Directory of the output files."},
    )
    data: Optional[str] = field(
        default=None,
        metadata={"help": "CSV dataset, overrides the configuration."},
    )


@dataclass
class RunArguments:
    """Sampler arguments, each overriding the configuration."""

    __name__ = "run_args"

    iterations: Optional[int] = field(default=None, metadata={"help": "Number of iterations."})
    n_importance: Optional[int] = field(
        default=None, metadata={"help": "Number of importance samples per estimate."}
    )
    burn_in: Optional[int] = field(
        default=None, metadata={"help": "Burn-in recorded in the trace metadata."}
    )
    chains: Optional[int] = field(
        default=None,
        metadata={"help": "Number of independent chains, seeded seed, seed+1, ..."},
    )
    exact: Optional[bool] = field(
        default=None,
        metadata={"help": "Use the exact likelihood by enumeration of the missing cells."},
    )
    log_every: Optional[int] = field(
        default=None, metadata={"help": "Progress logging period in iterations."}
    )


@dataclass
class TuneArguments:
    """Arguments of the search for the number of importance samples."""

    __name__ = "tune_args"

    n_grid: List[int] = field(
        default_factory=lambda: [50, 200, 800, 3200],
        metadata={"help": "Numbers of importance samples to evaluate."},
    )
    replicates: int = field(
        default=100, metadata={"help": "Independent estimates per number of samples."}
    )
    threshold: float = field(
        default=2.0, metadata={"help": "Largest acceptable variance of the log estimate."}
    )
    theta_file: Optional[str] = field(
        default=None,
        metadata={"help": "YAML mapping of parameter values, e.g. truth.yaml; default: configured initial values."},
    )


@dataclass
class SurfaceArguments:
    """Arguments of the profile surface."""

    __name__ = "surface_args"

    param_a: str = field(metadata={"help": "First grid parameter."})
    param_b: str = field(metadata={"help": "Second grid parameter."})
    range_a: List[float] = field(metadata={"help": "Lower and upper bound of the first parameter."})
    range_b: List[float] = field(metadata={"help": "Lower and upper bound of the second parameter."})
    steps: int = field(default=20, metadata={"help": "Grid points per parameter."})
    n_importance: Optional[int] = field(
        default=None, metadata={"help": "Number of importance samples per estimate."}
    )
    seed_mode: SeedMode = field(
        default=SeedMode.fresh,
        metadata={"help": "fresh: new fills at every point; common: one set of fills per replicate."},
    )
    replicates: int = field(default=2, metadata={"help": "Independent replications of the surface."})
    theta_file: Optional[str] = field(
        default=None,
        metadata={"help": "YAML mapping of the fixed parameter values; default: configured initial values."},
    )


@dataclass
class DiagnoseArguments:
    """Arguments of the trace summary."""

    __name__ = "diagnose_args"

    trace: Optional[str] = field(
        default=None, metadata={"help": "Trace CSV, default: trace.csv in the output directory."}
    )
    burn_in: Optional[int] = field(
        default=None,
        metadata={"help": "Leading rows discarded, default: configuration or trace metadata."},
    )
    rhat_threshold: Optional[float] = field(
        default=None, metadata={"help": "R-hat above which the exit status is 2, default 1.1."}
    )
    truth_file: Optional[str] = field(
        default=None, metadata={"help": "YAML mapping of true values, adds truth and coverage columns."}
    )
    level: float = field(default=0.95, metadata={"help": "Credible level."})
    with_mle: bool = field(
        default=False, metadata={"help": "Add complete-case maximum-likelihood estimates."}
    )


COMMAND_ARGUMENTS = {
    "simulate": (CommonArguments,),
    "run": (CommonArguments, RunArguments),
    "tune": (CommonArguments, TuneArguments),
    "surface": (CommonArguments, SurfaceArguments),
    "diagnose": (CommonArguments, DiagnoseArguments),
}
