import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

from network.manet import ManetConfig, generate_samples, load_sample, pick_endpoints, preset
from network.netmodel import EndpointPair
from rating.ror import LARGE, MODES, SHORT, rate_pattern
from routing.capillary import CapillaryBuilder
from utils.config import Config
from utils.errors import CapillaryError, ValidationError
from utils.logger import get_logger
from utils.models import FecParams, StaticTolerance

log = get_logger("Experiment")

CONFIG_FIELDS = {"manet", "preset", "networks", "endpoints", "layers", "tolerances",
                 "fec", "modes", "sets", "seed", "workers"}

ROR_COLUMNS = ["set", "layer", "t", "mode", "mean_ror", "n_samples"]
HUNTING_COLUMNS = ["layer", "mean_factor", "mean_iterations", "mean_bottlenecks",
                   "mean_initial_suspects", "n_samples"]
FLOAT_FORMAT = "%.10g"


@dataclass
class ExperimentConfig:
    manet: Optional[ManetConfig] = None
    networks: List[str] = field(default_factory=list)
    endpoints: Optional[EndpointPair] = None
    layers: Tuple[int, int] = Config.LAYER_RANGE
    tolerances: Tuple[float, ...] = Config.TOLERANCE_GRID
    fec: FecParams = field(default_factory=FecParams)
    modes: Tuple[str, ...] = MODES
    sets: int = 1
    seed: int = 0
    workers: int = Config.WORKERS

    def __post_init__(self):
        if (self.manet is None) == (not self.networks):
            raise ValidationError("Experiment needs exactly one of a MANET config or a network file list")
        lo, hi = self.layers
        if lo < 1 or hi < lo:
            raise ValidationError(f"Layer range must satisfy 1 <= from <= to, got {lo}..{hi}")
        if not self.tolerances:
            raise ValidationError("Tolerance grid is empty")
        for t in self.tolerances:
            StaticTolerance(t)
        if not self.modes:
            raise ValidationError("Mode set is empty")
        unknown = [m for m in self.modes if m not in MODES]
        if unknown:
            raise ValidationError(f"Unknown mode(s) {unknown}; expected a subset of {list(MODES)}")
        if self.sets < 1:
            raise ValidationError(f"Number of sets must be >= 1, got {self.sets}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        if not isinstance(doc, dict):
            raise ValidationError("Experiment config must be a JSON object")
        unknown = set(doc) - CONFIG_FIELDS
        if unknown:
            raise ValidationError(f"Unknown experiment field(s): {', '.join(sorted(unknown))}")

        kwargs = {}
        if "preset" in doc:
            kwargs["manet"] = preset(doc["preset"])
        if "manet" in doc:
            kwargs["manet"] = ManetConfig.from_dict(doc["manet"])
        if "networks" in doc:
            base = Path(base_dir) if base_dir else Path.cwd()
            kwargs["networks"] = [str(base / path) for path in doc["networks"]]
        if "endpoints" in doc:
            ends = doc["endpoints"]
            if isinstance(ends, dict):
                kwargs["endpoints"] = EndpointPair(int(ends["source"]), int(ends["sink"]))
            else:
                kwargs["endpoints"] = EndpointPair(int(ends[0]), int(ends[1]))
        if "layers" in doc:
            kwargs["layers"] = (int(doc["layers"][0]), int(doc["layers"][1]))
        if "tolerances" in doc:
            kwargs["tolerances"] = tuple(float(t) for t in doc["tolerances"])
        if "fec" in doc:
            kwargs["fec"] = FecParams(M=int(doc["fec"].get("M", Config.FEC_M)),
                                      DER=float(doc["fec"].get("DER", Config.FEC_DER)))
        if "modes" in doc:
            kwargs["modes"] = tuple(doc["modes"])
        for key in ("sets", "seed", "workers"):
            if key in doc:
                kwargs[key] = int(doc[key])
        return cls(**kwargs)


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"Experiment config {path} is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(doc, base_dir=path.parent)


@dataclass
class SampleOutcome:
    index: int
    ror_records: list = field(default_factory=list)
    layer_records: list = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class ExperimentResult:
    ror_table: pd.DataFrame
    hunting_table: pd.DataFrame
    sample_table: pd.DataFrame
    ratio_table: Optional[pd.DataFrame]
    dropped: int
    failures: List[Tuple[int, str]]
    # (sample, layer, t) rows where large-block ROR exceeds short-buffer ROR
    mode_inversions: int = 0


def set_index(sample_index, sample_count, sets):
    """Contiguous equal chunks, 1-based; the remainder goes to the last set."""
    size = max(1, sample_count // sets)
    return min(sample_index // size, sets - 1) + 1


def _load_samples(cfg: ExperimentConfig):
    if cfg.manet is not None:
        return generate_samples(cfg.manet)
    samples = []
    for path in cfg.networks:
        _, net = load_sample(Path(path).read_text(encoding="utf-8"))
        samples.append(net)
    return samples


def process_sample(index, net, cfg: ExperimentConfig) -> SampleOutcome:
    """Builds layers up to the top of the range once, rating a snapshot at every layer in range."""
    outcome = SampleOutcome(index=index)
    try:
        ends = cfg.endpoints.check(net) if cfg.endpoints else pick_endpoints(net, cfg.seed + index)
        builder = CapillaryBuilder(net, ends)
        lo, hi = cfg.layers
        pattern = None
        for layer in range(1, hi + 1):
            if not builder.done:
                builder.step()
                pattern = None
            if layer < lo:
                continue
            if pattern is None:
                pattern = builder.snapshot()
                if pattern.conservation_error() > Config.EPS_LOAD:
                    log.warning(f"Sample {index} layer {layer}: conservation off by "
                                f"{pattern.conservation_error():.3e}")
            for t in cfg.tolerances:
                for mode in cfg.modes:
                    report = rate_pattern(pattern, t, mode, cfg.fec)
                    outcome.ror_records.append((index, layer, t, mode, report.ror))
        for result in builder.layers:
            outcome.layer_records.append((index, result.layer, result.factor, len(result.bottlenecks),
                                          result.hunting_iterations, result.suspect_trail[0]))
    except CapillaryError as e:
        log.warning(f"Sample {index} dropped: {e}")
        outcome.error = str(e)
    return outcome


def _ratio_table(sample_table):
    means = sample_table.groupby(["layer", "t", "mode"])["ror"].mean().unstack("mode")
    ratio = (means[LARGE] / means[SHORT].where(means[SHORT] > 0)).rename("large_over_short")
    return ratio.reset_index()


def _mode_inversions(sample_table):
    """Sample rows rated large above short. Integer FEC block sizes make these possible."""
    per_mode = sample_table.pivot_table(index=["sample", "layer", "t"], columns="mode", values="ror")
    return int((per_mode[LARGE] > per_mode[SHORT] + 1e-12).sum())


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    samples = _load_samples(cfg)
    log.info(f"Running {len(samples)} sample(s), layers {cfg.layers[0]}..{cfg.layers[1]}, "
             f"{len(cfg.tolerances)} tolerance(s), modes {list(cfg.modes)}")

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        outcomes = list(pool.map(lambda item: process_sample(item[0], item[1], cfg), enumerate(samples)))

    failures = [(o.index, o.error) for o in outcomes if o.error is not None]
    kept = [o for o in outcomes if o.error is None]

    sample_table = pd.DataFrame(
        [record for o in kept for record in o.ror_records],
        columns=["sample", "layer", "t", "mode", "ror"])
    sample_table.insert(1, "set", [set_index(i, len(samples), cfg.sets) for i in sample_table["sample"]])

    ror_table = (sample_table.groupby(["set", "layer", "t", "mode"])["ror"]
                 .agg(mean_ror="mean", n_samples="count")
                 .reset_index())[ROR_COLUMNS]

    layers = pd.DataFrame(
        [record for o in kept for record in o.layer_records],
        columns=["sample", "layer", "factor", "bottlenecks", "iterations", "initial_suspects"])
    hunting_table = (layers.groupby("layer")
                     .agg(mean_factor=("factor", "mean"),
                          mean_iterations=("iterations", "mean"),
                          mean_bottlenecks=("bottlenecks", "mean"),
                          mean_initial_suspects=("initial_suspects", "mean"),
                          n_samples=("sample", "count"))
                     .reset_index())[HUNTING_COLUMNS]

    ratio_table, inversions = None, 0
    if SHORT in cfg.modes and LARGE in cfg.modes and not sample_table.empty:
        ratio_table = _ratio_table(sample_table)
        inversions = _mode_inversions(sample_table)
        log.info(f"Mean large/short ROR ratio: {ratio_table['large_over_short'].mean():.3f}, "
                 f"{inversions} of {len(sample_table) // 2} sample row(s) rate large above short")

    log.info(f"Experiment done: {len(kept)} sample(s) kept, {len(failures)} dropped")
    return ExperimentResult(ror_table=ror_table, hunting_table=hunting_table, sample_table=sample_table,
                            ratio_table=ratio_table, dropped=len(failures), failures=failures,
                            mode_inversions=inversions)


def write_results(result: ExperimentResult, out_dir, prefix="experiment"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}_ror.csv", out_dir / f"{prefix}_hunting.csv"]
    result.ror_table.to_csv(paths[0], index=False, float_format=FLOAT_FORMAT)
    result.hunting_table.to_csv(paths[1], index=False, float_format=FLOAT_FORMAT)
    if result.ratio_table is not None:
        paths.append(out_dir / f"{prefix}_ratio.csv")
        result.ratio_table.to_csv(paths[-1], index=False, float_format=FLOAT_FORMAT)
    return paths
