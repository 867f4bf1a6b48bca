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
"""Run configuration: one YAML file carrying the data, the model and the sampler settings.

A minimal configuration reads

    data: data.csv
    response: y
    columns: [x1, x2]
    parameters:
      alpha:
        alpha: {prior: {family: InverseGamma, params: [1.65, 0.65]}, transform: Log}
      beta:
        beta0: {prior: {family: Normal, params: [0, 3]}}
        beta1: {prior: {family: Normal, params: [0, 3]}, column: x1}
        beta2: {prior: {family: Normal, params: [0, 3]}, column: x2}
    covariate_model:
      x2: {family: Normal, params: [0, alpha]}
    importance:
      x2: {family: ScaledT, params: [10, 0, alpha]}

with optional `mechanism`, `sampler` and `simulation` blocks. A coefficient without
`column` is the intercept.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import importlib_resources
import numpy as np
import yaml

from .datasets.core import load_dataset
from .distributions import DistributionSpec, Family
from .models.core import (
    ConditionalDistribution,
    Dataset,
    Mechanism,
    MechanismKind,
    ModelSpec,
)
from .models.expressions import AffineExpression, to_configuration
from .models.parameters import BLOCKS, Transform
from .sampler import ProposalSpec

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

DEFAULT_PROPOSAL_SCALE = 0.1


def _check_keys(
    section: str, configuration: Dict[str, Any], allowed: Sequence[str], required: Sequence[str] = ()
) -> None:
    if not isinstance(configuration, dict):
        raise ValueError(f"{section} must be a mapping, got {configuration!r}")
    unknown = set(configuration) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in {section}: {', '.join(sorted(map(str, unknown)))}")
    missing = set(required) - set(configuration)
    if missing:
        raise ValueError(f"missing keys in {section}: {', '.join(sorted(missing))}")


@dataclass
class ConditionalConfig:
    """A family with parameter expressions."""

    family: str
    params: List[Any]

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any], section: str = "distribution") -> "ConditionalConfig":
        _check_keys(section, configuration, ["family", "params"], ["family", "params"])
        params = configuration["params"]
        if not isinstance(params, list):
            params = [params]
        return cls(Family.parse(configuration["family"]).value, [to_configuration(value) for value in params])

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "params": list(self.params)}

    def parse(self, parameter_names: List[str], column_names: List[str]) -> ConditionalDistribution:
        return ConditionalDistribution.parse(self.family, self.params, parameter_names, column_names)


@dataclass
class ParameterConfig:
    """One scalar parameter: prior, transform, proposal scale and optional initial value."""

    name: str
    block: str
    prior: ConditionalConfig
    transform: str = Transform.identity.value
    column: Optional[str] = None
    init: Optional[float] = None
    scale: float = DEFAULT_PROPOSAL_SCALE

    @classmethod
    def from_dict(cls, name: str, block: str, configuration: Dict[str, Any]) -> "ParameterConfig":
        section = f"parameter {name}"
        allowed = ["prior", "transform", "init", "scale"] + (["column"] if block == "beta" else [])
        _check_keys(section, configuration, allowed, ["prior"])
        init = configuration.get("init")
        return cls(
            name=str(name),
            block=block,
            prior=ConditionalConfig.from_dict(configuration["prior"], f"prior of {name}"),
            transform=Transform.parse(configuration.get("transform")).value,
            column=configuration.get("column"),
            init=None if init is None else float(init),
            scale=float(configuration.get("scale", DEFAULT_PROPOSAL_SCALE)),
        )

    def to_dict(self) -> Dict[str, Any]:
        configuration: Dict[str, Any] = {"prior": self.prior.to_dict(), "transform": self.transform}
        if self.block == "beta":
            configuration["column"] = self.column
        if self.init is not None:
            configuration["init"] = self.init
        configuration["scale"] = self.scale
        return configuration

    def distribution(self) -> DistributionSpec:
        return DistributionSpec(Family.parse(self.prior.family), tuple(float(value) for value in self.prior.params))


@dataclass
class MechanismConfig:
    kind: str = MechanismKind.logistic.value
    columns: List[str] = field(default_factory=list)
    predictor: Any = 0.0

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any]) -> "MechanismConfig":
        _check_keys("mechanism", configuration, ["kind", "columns", "predictor"], ["columns", "predictor"])
        return cls(
            kind=MechanismKind(configuration.get("kind", MechanismKind.logistic.value)).value,
            columns=list(configuration["columns"]),
            predictor=to_configuration(configuration["predictor"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "columns": list(self.columns), "predictor": self.predictor}

    def parse(self, parameter_names: List[str], column_names: List[str]) -> Mechanism:
        return Mechanism(
            MechanismKind(self.kind),
            tuple(self.columns),
            AffineExpression.parse(self.predictor, parameter_names, column_names),
        )


@dataclass
class SamplerConfig:
    n_importance: int = 1000
    iterations: int = 10000
    burn_in: int = 0
    seed: int = 0
    workers: int = 1
    chains: int = 1
    log_every: int = 1000
    exact: bool = False
    enumeration_cap: int = 2**16
    rhat_threshold: float = 1.1
    proposal_matrix: Optional[List[List[float]]] = None

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any]) -> "SamplerConfig":
        _check_keys("sampler", configuration, list(cls.__dataclass_fields__))
        values = dict(configuration)
        if values.get("proposal_matrix") is not None:
            values["proposal_matrix"] = [[float(value) for value in row] for row in values["proposal_matrix"]]
        if "rhat_threshold" in values:
            values["rhat_threshold"] = float(values["rhat_threshold"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class SimulationConfig:
    """Generative model of the covariates; the response and the mask follow the model."""

    rows: int
    truth: Dict[str, float]
    columns: Dict[str, ConditionalConfig]
    mechanism: Optional[MechanismConfig] = None

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any]) -> "SimulationConfig":
        _check_keys("simulation", configuration, ["rows", "truth", "columns", "mechanism"], ["rows", "truth", "columns"])
        mechanism = configuration.get("mechanism")
        return cls(
            rows=int(configuration["rows"]),
            truth={str(name): float(value) for name, value in configuration["truth"].items()},
            columns={
                str(name): ConditionalConfig.from_dict(value, f"simulated column {name}")
                for name, value in configuration["columns"].items()
            },
            mechanism=None if mechanism is None else MechanismConfig.from_dict(mechanism),
        )

    def to_dict(self) -> Dict[str, Any]:
        configuration: Dict[str, Any] = {
            "rows": self.rows,
            "truth": dict(self.truth),
            "columns": {name: value.to_dict() for name, value in self.columns.items()},
        }
        if self.mechanism is not None:
            configuration["mechanism"] = self.mechanism.to_dict()
        return configuration


@dataclass
class RunConfig:
    """The whole model and its sampler settings."""

    columns: List[str]
    parameters: List[ParameterConfig]
    covariate_model: Dict[str, ConditionalConfig] = field(default_factory=dict)
    importance: Dict[str, ConditionalConfig] = field(default_factory=dict)
    mechanism: Optional[MechanismConfig] = None
    response: str = "y"
    data: Optional[str] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    simulation: Optional[SimulationConfig] = None
    base_dir: Optional[Path] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any], base_dir: Optional[Union[str, Path]] = None) -> "RunConfig":
        """Build a configuration from its mapping form.
        Args:
            configuration: parsed YAML content.
            base_dir: directory relative data paths are resolved against.
        Returns:
            the configuration.
        Raises:
            ValueError: in case of unknown or missing keys.
        """
        _check_keys(
            "configuration",
            configuration,
            ["data", "response", "columns", "parameters", "covariate_model", "importance", "mechanism", "sampler", "simulation"],
            ["columns", "parameters"],
        )
        blocks = configuration["parameters"]
        _check_keys("parameters", blocks, list(BLOCKS))
        parameters = [
            ParameterConfig.from_dict(name, block, value)
            for block in BLOCKS
            for name, value in (blocks.get(block) or {}).items()
        ]
        mechanism = configuration.get("mechanism")
        simulation = configuration.get("simulation")
        return cls(
            columns=[str(column) for column in configuration["columns"]],
            parameters=parameters,
            covariate_model={
                str(name): ConditionalConfig.from_dict(value, f"covariate model of {name}")
                for name, value in (configuration.get("covariate_model") or {}).items()
            },
            importance={
                str(name): ConditionalConfig.from_dict(value, f"importance proposal of {name}")
                for name, value in (configuration.get("importance") or {}).items()
            },
            mechanism=None if mechanism is None else MechanismConfig.from_dict(mechanism),
            response=str(configuration.get("response", "y")),
            data=configuration.get("data"),
            sampler=SamplerConfig.from_dict(configuration.get("sampler") or {}),
            simulation=None if simulation is None else SimulationConfig.from_dict(simulation),
            base_dir=None if base_dir is None else Path(base_dir),
        )

    def to_dict(self) -> Dict[str, Any]:
        configuration: Dict[str, Any] = {}
        if self.data is not None:
            configuration["data"] = self.data
        configuration["response"] = self.response
        configuration["columns"] = list(self.columns)
        configuration["parameters"] = {
            block: {parameter.name: parameter.to_dict() for parameter in self.parameters if parameter.block == block}
            for block in BLOCKS
        }
        configuration["covariate_model"] = {name: value.to_dict() for name, value in self.covariate_model.items()}
        configuration["importance"] = {name: value.to_dict() for name, value in self.importance.items()}
        if self.mechanism is not None:
            configuration["mechanism"] = self.mechanism.to_dict()
        configuration["sampler"] = self.sampler.to_dict()
        if self.simulation is not None:
            configuration["simulation"] = self.simulation.to_dict()
        return configuration

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a configuration file.
        Raises:
            FileNotFoundError: in case the file does not exist.
            ValueError: in case the file is not valid YAML or not a valid configuration.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"configuration {path} not found")
        try:
            with open(path) as fp:
                content = yaml.safe_load(fp)
        except yaml.YAMLError as error:
            raise ValueError(f"configuration {path} is not valid YAML: {error}")
        return cls.from_dict(content, base_dir=path.parent)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def to_yaml(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dump())
        return path

    def names(self, block: Optional[str] = None) -> List[str]:
        return [parameter.name for parameter in self.parameters if block is None or parameter.block == block]

    def model_spec(self) -> ModelSpec:
        """The model described by the configuration.
        Raises:
            ValueError: in case the model is inconsistent.
        """
        names = self.names()
        return ModelSpec(
            column_names=tuple(self.columns),
            alpha_names=tuple(self.names("alpha")),
            beta_names=tuple(self.names("beta")),
            design=tuple(parameter.column for parameter in self.parameters if parameter.block == "beta"),
            phi_names=tuple(self.names("phi")),
            transforms={parameter.name: Transform.parse(parameter.transform) for parameter in self.parameters},
            priors={parameter.name: parameter.distribution() for parameter in self.parameters},
            covariate_model={
                column: conditional.parse(names, self.columns) for column, conditional in self.covariate_model.items()
            },
            mechanism=None if self.mechanism is None else self.mechanism.parse(names, self.columns),
            is_proposals={
                column: conditional.parse(names, self.columns) for column, conditional in self.importance.items()
            },
        )

    def proposal_spec(self) -> ProposalSpec:
        by_name = {parameter.name: parameter for parameter in self.parameters}
        scales = np.array([by_name[name].scale for name in self.model_spec().parameter_names])
        return ProposalSpec(scales, self.sampler.proposal_matrix)

    def init_values(self) -> Dict[str, float]:
        """Configured initial values, possibly for a subset of the parameters."""
        return {parameter.name: parameter.init for parameter in self.parameters if parameter.init is not None}

    def resolve(self, path: Union[str, Path]) -> Path:
        """Resolve a path against the configuration directory."""
        path = Path(path)
        if path.is_absolute() or self.base_dir is None:
            return path
        return self.base_dir / path

    def data_path(self, override: Optional[Union[str, Path]] = None) -> Path:
        if override is not None:
            return Path(override)
        if self.data is None:
            raise ValueError("no data file given in the configuration or on the command line")
        return self.resolve(self.data)

    def load_data(self, override: Optional[Union[str, Path]] = None) -> Dataset:
        """Load the configured dataset and check it against the model."""
        data = load_dataset(self.data_path(override), self.response, self.columns)
        self.model_spec().validate(data)
        return data


def shipped_configuration(name: str) -> RunConfig:
    """Load a configuration shipped with the package, e.g. simulation_study.yaml."""
    with importlib_resources.as_file(
        importlib_resources.files("pseudo_marginal.glm_missing") / "resources" / name
    ) as path:
        return RunConfig.from_yaml(path)


def load_configuration(path: Union[str, Path]) -> RunConfig:
    """Load a configuration from a file, or a shipped one by name."""
    if Path(path).exists():
        return RunConfig.from_yaml(path)
    shipped = importlib_resources.files("pseudo_marginal.glm_missing") / "resources" / str(path)
    if shipped.is_file():
        logger.info(f"using shipped configuration {path}")
        return shipped_configuration(str(path))
    raise FileNotFoundError(f"configuration {path} not found")
