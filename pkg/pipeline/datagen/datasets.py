"""
Paired datasets: generation in index order, train/test split and the on-disk
form (raw record file of combined images plus a key=value manifest).
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.errors import InvalidArgument
from core.fields import Field2D, PairedSample
from core.io import read_record_array, read_sidecar, write_records, write_sidecar
from core.parallel import map_ordered
from pipeline.datagen.errors import GenerationExhausted, datagen_errors
from pipeline.datagen.masks import sample_mask
from pipeline.datagen.schemas import DatagenConfig
from pipeline.datagen.trenches import sample_trench_cell
from pipeline.litho.model import litho_forward
from pipeline.litho.schemas import LithoParams
from pipeline.phasefield.errors import SolverDiverged
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.solver import anneal_layout

logger = logging.getLogger(__name__)

SPLIT_STREAM = 0x5D11


@dataclass
class Dataset:
    samples: list[PairedSample]
    train: list[int]
    test: list[int]
    seed: int
    problem: str = "diffusion"
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        indices = sorted(self.train + self.test)
        if indices != list(range(len(self.samples))):
            raise InvalidArgument(datagen_errors[400].SplitMismatch.value.format(count=len(self.samples)))

    def __len__(self):
        return len(self.samples)

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples[0].combined.shape

    def subset(self, split: str) -> list[PairedSample]:
        if split == "all":
            return list(self.samples)
        indices = self.train if split == "train" else self.test
        return [self.samples[i] for i in indices]

    def matrix(self, split: str = "all", dtype=np.float32) -> np.ndarray:
        """Flattened combined images, one row per sample."""
        return np.stack([s.combined.data.ravel() for s in self.subset(split)]).astype(dtype)


def split_indices(n: int, seed: int, test_fraction: float = 800 / 10800,
                  test_count: int | None = None) -> tuple[list[int], list[int]]:
    if test_count is None:
        test_count = int(round(n * test_fraction))
    if test_count > n:
        raise InvalidArgument(datagen_errors[400].TestCountTooLarge.value.format(test_count=test_count, count=n))
    order = np.random.default_rng(np.random.SeedSequence([seed, SPLIT_STREAM])).permutation(n)
    return sorted(order[test_count:].tolist()), sorted(order[:test_count].tolist())


def retry_seed(seed: int, index: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed, index, attempt]).generate_state(1)[0])


def _diffusion_sample(args) -> tuple[PairedSample, dict]:
    index, seed, phase_params, trench_config = args
    sample_seed = seed + index
    reason = ""
    for attempt in range(trench_config.max_retries + 1):
        cell = sample_trench_cell(sample_seed, trench_config)
        try:
            annealed = anneal_layout(cell, phase_params)
        except SolverDiverged as exc:
            reason = exc.message
            logger.warning("Sample %d diverged at step %d (seed %d); regenerating", index, exc.step, sample_seed)
            sample_seed = retry_seed(seed, index, attempt + 1)
            continue
        evolution = annealed.evolution
        return PairedSample(cell, annealed.final), {
            "retries": attempt,
            "steps": evolution.steps,
            "converged": evolution.converged,
            "escalations": evolution.escalations,
        }
    raise GenerationExhausted(
        datagen_errors[400].RetriesExhausted.value.format(
            index=index, seed=seed + index, retries=trench_config.max_retries, reason=reason
        )
    )


def _litho_sample(args) -> tuple[PairedSample, dict]:
    index, seed, litho_params, mask_config = args
    mask = sample_mask(seed + index, mask_config)
    return PairedSample(mask, litho_forward(mask, litho_params)), {}


def _duplicate_count(samples: list[PairedSample]) -> int:
    digests = {hashlib.sha256(s.initial.data.tobytes()).hexdigest() for s in samples}
    return len(samples) - len(digests)


def generate_diffusion_dataset(n: int, seed: int, phase_params: PhaseParams, config: DatagenConfig,
                               workers: int = 1) -> Dataset:
    trench = config.trench
    if (phase_params.ny, phase_params.nx) != (trench.height, trench.width):
        phase_params = phase_params.for_grid(trench.width, trench.height)

    jobs = [(index, seed, phase_params, trench) for index in range(n)]
    results = map_ordered(_diffusion_sample, jobs, workers)
    samples = [sample for sample, _ in results]
    records = [record for _, record in results]

    stats = {
        "retries": sum(r["retries"] for r in records),
        "unconverged": sum(not r["converged"] for r in records),
        "escalations": sum(r["escalations"] for r in records),
        "mean_steps": float(np.mean([r["steps"] for r in records])),
        "duplicates": _duplicate_count(samples),
    }
    train, test = split_indices(n, seed, config.test_fraction, config.test_count)
    logger.info("Generated %d diffusion samples (%s)", n, stats)
    return Dataset(samples, train, test, seed, problem="diffusion", stats=stats)


def generate_litho_dataset(n: int, seed: int, litho_params: LithoParams, config: DatagenConfig,
                           workers: int = 1) -> Dataset:
    litho_params = litho_params.for_mask(config.mask.size, config.mask.size)
    jobs = [(index, seed, litho_params, config.mask) for index in range(n)]
    samples = [sample for sample, _ in map_ordered(_litho_sample, jobs, workers)]

    stats = {"duplicates": _duplicate_count(samples)}
    train, test = split_indices(n, seed, config.test_fraction, config.test_count)
    logger.info("Generated %d litho samples (%s)", n, stats)
    return Dataset(samples, train, test, seed, problem="litho", stats=stats)


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def save_dataset(path, dataset: Dataset, config_hash: str = "") -> Path:
    write_records(path, [s.combined for s in dataset.samples])
    manifest = manifest_path(path)
    height, width = dataset.shape
    write_sidecar(manifest, {
        "problem": dataset.problem,
        "count": len(dataset),
        "height": height,
        "width": width,
        "seed": dataset.seed,
        "config_hash": config_hash,
        "train": dataset.train,
        "test": dataset.test,
        **{f"stats.{key}": value for key, value in dataset.stats.items()},
    })
    return manifest


def _indices(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v]


def load_dataset(path) -> Dataset:
    """Read a dataset; without a manifest every sample counts as training data."""
    records = read_record_array(path)
    samples = [PairedSample.split(Field2D(record)) for record in records]

    manifest = manifest_path(path)
    if not manifest.exists():
        return Dataset(samples, list(range(len(samples))), [], seed=0, problem="unknown")

    entries = read_sidecar(manifest)
    if int(entries.get("count", len(samples))) != len(samples):
        raise InvalidArgument(
            datagen_errors[400].ManifestMismatch.value.format(
                path=path, expected=entries["count"], found=len(samples)
            )
        )
    stats = {key[len("stats."):]: value for key, value in entries.items() if key.startswith("stats.")}
    return Dataset(
        samples,
        _indices(entries.get("train", "")),
        _indices(entries.get("test", "")),
        seed=int(entries.get("seed", 0)),
        problem=entries.get("problem", "unknown"),
        stats=stats,
    )

