"""
Ensembles of independent realizations.

Members run in a thread pool; results are gathered in seed order so means
and standard deviations are bit-identical for any worker count.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from eliot import start_action

from cascade_fourier.cascade import dim2_estimate, generate, is_extinct
from cascade_fourier.config import thread_count
from cascade_fourier.curves import CurveSpec
from cascade_fourier.errors import AllExtinct, InvalidParams
from cascade_fourier.estimation.fitting import DecayFit
from cascade_fourier.fourier import DEFAULT_TOLERANCE, DecaySampleSet, decay_profile, fit_decay
from cascade_fourier.weights import WeightModel


@dataclass
class EnsembleResult:
    """Per-seed fits of one or more profile columns, extinct seeds set aside."""

    primary: str
    seeds: List[int]
    kept: List[int]
    discarded: List[int]
    fits: Dict[str, List[DecayFit]] = field(default_factory=dict)

    def estimates(self, column: Optional[str] = None) -> np.ndarray:
        return np.array([fit.fourier_dim_estimate for fit in self.fits[column or self.primary]])

    def column_mean(self, column: Optional[str] = None) -> float:
        return float(np.mean(self.estimates(column)))

    def column_std(self, column: Optional[str] = None) -> float:
        values = self.estimates(column)
        return float(np.std(values, ddof=1)) if values.size > 1 else 0.0

    @property
    def mean(self) -> float:
        return self.column_mean()

    @property
    def std(self) -> float:
        return self.column_std()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "primary": self.primary,
            "seeds": list(self.seeds),
            "kept": list(self.kept),
            "discarded": list(self.discarded),
            "mean": {column: self.column_mean(column) for column in self.fits},
            "std": {column: self.column_std(column) for column in self.fits},
            "estimates": {column: self.estimates(column).tolist() for column in self.fits},
        }


def _run_members(seeds: Sequence[int], member: Any, threads: Optional[int]) -> List[Any]:
    workers = min(thread_count(threads), len(seeds))
    if workers <= 1:
        return [member(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(member, seeds))


def ensemble_profiles(
    model: WeightModel,
    curve: Optional[CurveSpec],
    depth: int,
    seeds: Sequence[int],
    k0: int = 4,
    k1: int = 11,
    n_theta: int = 256,
    n_shell: int = 4,
    enrich_normals: bool = True,
    p_list: Sequence[float] = (1.0, 2.0, 4.0),
    tol: float = DEFAULT_TOLERANCE,
    threads: Optional[int] = None,
) -> Dict[int, Optional[DecaySampleSet]]:
    """
    Decay profile of every seed's realization; None marks an extinct one.

    Raises:
        InvalidParams: a seed listed twice
    """
    seeds = [int(s) for s in seeds]
    repeated = sorted(s for s, count in Counter(seeds).items() if count > 1)
    if repeated:
        raise InvalidParams(f"seeds must be distinct, repeated: {repeated}")

    def member(seed: int) -> Optional[DecaySampleSet]:
        r = generate(model, depth, seed, threads=1)
        if is_extinct(r):
            return None
        return decay_profile(
            r,
            curve,
            k0,
            k1,
            n_theta=n_theta,
            p_list=p_list,
            enrich_normals=enrich_normals,
            n_shell=n_shell,
            tol=tol,
            threads=1,
        )

    with start_action(
        action_type="ensemble_profiles",
        family=model.family.value,
        support=curve.family if curve is not None else "flat",
        depth=depth,
        members=len(seeds),
    ):
        return dict(zip(seeds, _run_members(seeds, member, threads)))


def summarize_profiles(
    profiles: Dict[int, Optional[DecaySampleSet]],
    columns: Sequence[str] = ("sup",),
    base: float = 2.0,
) -> EnsembleResult:
    """
    Fit each kept profile and collect the estimates.

    Raises:
        AllExtinct: every profile is None
    """
    seeds = list(profiles)
    kept = [seed for seed in seeds if profiles[seed] is not None]
    discarded = [seed for seed in seeds if profiles[seed] is None]
    with start_action(action_type="summarize_profiles", members=len(seeds), columns=list(columns)) as action:
        if discarded:
            action.log(message_type="extinct_members_discarded", seeds=discarded)
        if not kept:
            raise AllExtinct(f"all {len(seeds)} realizations went extinct")
        fits = {column: [fit_decay(profiles[seed], column, base=base) for seed in kept] for column in columns}
        return EnsembleResult(primary=columns[0], seeds=seeds, kept=kept, discarded=discarded, fits=fits)


def ensemble_fourier_dim(
    model: WeightModel,
    curve: Optional[CurveSpec],
    depth: int,
    seeds: Sequence[int],
    k0: int = 4,
    k1: int = 11,
    n_theta: int = 256,
    n_shell: int = 4,
    enrich_normals: bool = True,
    columns: Sequence[str] = ("sup",),
    p_list: Sequence[float] = (1.0, 2.0, 4.0),
    tol: float = DEFAULT_TOLERANCE,
    threads: Optional[int] = None,
) -> EnsembleResult:
    """
    Fourier-dimension estimates -2 * slope of each member's decay profile.

    Raises:
        InvalidParams: fewer than two seeds
        AllExtinct: every member had zero total mass
    """
    if len(seeds) < 2:
        raise InvalidParams(f"an ensemble needs at least 2 seeds, got {len(seeds)}")
    with start_action(action_type="ensemble_fourier_dim", members=len(seeds), columns=list(columns)) as action:
        profiles = ensemble_profiles(
            model,
            curve,
            depth,
            seeds,
            k0=k0,
            k1=k1,
            n_theta=n_theta,
            n_shell=n_shell,
            enrich_normals=enrich_normals,
            p_list=p_list,
            tol=tol,
            threads=threads,
        )
        result = summarize_profiles(profiles, columns, base=model.b)
        action.log(message_type="ensemble_summary", mean=result.mean, std=result.std, discarded=len(result.discarded))
        return result


def ensemble_dim2(
    model: WeightModel,
    seeds: Sequence[int],
    n_min: int,
    n_max: int,
    threads: Optional[int] = None,
) -> List[DecayFit]:
    """Correlation-dimension slope for each seed, in seed order."""
    seeds = [int(s) for s in seeds]
    with start_action(action_type="ensemble_dim2", members=len(seeds), n_min=n_min, n_max=n_max):
        return _run_members(seeds, lambda seed: dim2_estimate(model, seed, n_min, n_max, threads=1), threads)
