"""Genetic-algorithm synthesis of modular compositions.

A candidate is scored by decoding it, lowering it to a chain, solving IK for
every task location and adding static penalties for missed locations,
collisions at the IK poses and torque-limit excess to the rms-torque
objective.  Compositions violating the epsilon rule short-circuit to the flat
assembly penalty.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .collision import Scene, chain_clearance, collision_constraint, is_collision_free
from .composition import (
    GENOME_LENGTH, MAX_DOF, MIN_DOF, ZERO_TWIST_GENE,
    AssemblyInfeasible, Composition, Genome, build_chain, decode,
)
from .dynamics import check_torque_limits, rms_torque_sum, torque_table
from .kinematics import IKSettings, ik_attempts, pose_error
from .library import LINK_NAMES, TWIST_LATTICE, LibraryConfig
from .task import TaskSpec

log = logging.getLogger(__name__)

#: metres of reach penalty charged per radian of orientation excess
ORIENTATION_LENGTH = 0.1


@dataclass(frozen=True)
class PenaltyWeights:
    reach: float = 1e3     # per m
    collide: float = 1e3   # per m
    torque: float = 1e2    # per N m
    assembly: float = 1e6  # flat

    def __post_init__(self):
        if not all(w > 0 for w in (self.reach, self.collide, self.torque, self.assembly)):
            raise ValueError("penalty weights must be positive")


@dataclass(frozen=True)
class GaSettings:
    population: int = 60
    generations: int = 120
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.08
    elitism: int = 2
    rng_seed: int = 0
    penalty_weights: PenaltyWeights = field(default_factory=PenaltyWeights)
    ik_seeds: int = 20
    stall_generations: int = 30
    conventional: bool = False
    workers: int = 1
    max_dof: int = MAX_DOF

    def __post_init__(self):
        for name in ("population", "generations", "tournament_size", "ik_seeds", "stall_generations", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not MIN_DOF <= self.max_dof <= MAX_DOF:
            raise ValueError(f"max_dof must lie in [{MIN_DOF}, {MAX_DOF}]")
        if self.elitism < 0 or self.elitism > self.population:
            raise ValueError("elitism must lie in [0, population]")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "penalty_weights" in d:
            d["penalty_weights"] = PenaltyWeights(**d["penalty_weights"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GA setting(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["penalty_weights"] = vars(self.penalty_weights).copy()
        return d


def conventional_mode(settings: GaSettings) -> GaSettings:
    """Settings restricted to zero intersecting twist (port and link choices kept)."""
    return replace(settings, conventional=True)


def gene_alphabets(settings: GaSettings):
    """Allowed values for every gene position."""
    twists = [ZERO_TWIST_GENE] if settings.conventional else list(range(len(TWIST_LATTICE)))
    seg = [[0, 1], [1, 2, 3, 4], twists, list(range(len(LINK_NAMES)))]
    return [list(range(MIN_DOF, settings.max_dof + 1))] + seg * MAX_DOF


@dataclass
class Evaluation:
    fitness: float
    objective: float = math.nan
    composition: Optional[Composition] = None
    assembly_ok: bool = True
    reach_excess: list = field(default_factory=list)
    position_residuals: list = field(default_factory=list)
    orientation_residuals: list = field(default_factory=list)
    collision: list = field(default_factory=list)
    torque_excess: float = 0.0
    torques: Optional[np.ndarray] = None
    ik_solutions: list = field(default_factory=list)
    ik_calls: int = 0
    violations: tuple = ()

    @property
    def feasible(self):
        return (self.assembly_ok and not any(self.reach_excess) and not any(self.collision)
                and self.torque_excess == 0.0)

    def penalty_terms(self, w: PenaltyWeights):
        return {
            "reach": w.reach * sum(self.reach_excess),
            "collision": w.collide * sum(self.collision),
            "torque": w.torque * self.torque_excess,
        }


def _tsl_seed(rng_seed, j):
    return int(np.random.SeedSequence([int(rng_seed), j]).generate_state(1)[0])


def reach_excess(pos_res, ori_res, task: TaskSpec, oriented: bool):
    ex = max(0.0, pos_res - task.pos_tol)
    if oriented:
        ex += ORIENTATION_LENGTH * max(0.0, ori_res - task.ori_tol)
    return ex


def solve_task_location(chain, target, task: TaskSpec, scene: Scene, seeds, rng_seed):
    """IK for one location, preferring collision-free solutions.

    Seeds are tried in order; the first solution meeting the tolerances with
    zero collision violation is taken.  Otherwise the reachable solution with
    the smallest violation wins, and failing that the smallest residual.
    Returns ``(q, pos_res, ori_res, violation, attempts)``.
    """
    settings = IKSettings(pos_tol=task.pos_tol, ori_tol=task.ori_tol)
    best, best_key = None, None
    attempts = 0
    for r in ik_attempts(chain, target, seeds, rng_seed, settings):
        attempts += 1
        if not r.success:
            viol = math.inf
        elif is_collision_free(chain, r.q, scene):
            viol = 0.0
        else:
            viol = collision_constraint(chain, r.q, scene)
        key = (not r.success, viol, r.residual)
        if best_key is None or key < best_key:
            best, best_key = (r, viol), key
        if r.success and viol == 0.0:
            break
    r, viol = best
    if not r.success:
        viol = collision_constraint(chain, r.q, scene)
    return r.q, r.position_residual, r.orientation_residual, viol, attempts


def evaluate(genome: Genome, task: TaskSpec, scene: Scene, library: LibraryConfig, settings: GaSettings) -> Evaluation:
    """Penalized fitness of one genome with per-term diagnostics."""
    w = settings.penalty_weights
    decoded = decode(genome, repair=True, conventional=settings.conventional, library=library)
    if isinstance(decoded, AssemblyInfeasible):
        return Evaluation(fitness=w.assembly, assembly_ok=False, violations=decoded.report.violations)
    comp = Composition(decoded.units, task.base_pose)
    return evaluate_composition(comp, task, scene, library, settings)


def evaluate_composition(comp: Composition, task: TaskSpec, scene: Scene, library: LibraryConfig,
                         settings: GaSettings) -> Evaluation:
    w = settings.penalty_weights
    chain = build_chain(comp, library)
    ev = Evaluation(fitness=math.nan, composition=comp)
    for j, (tsl, target) in enumerate(zip(task.tsls, task.targets())):
        q, pr, orr, viol, n_calls = solve_task_location(
            chain, target, task, scene, settings.ik_seeds, _tsl_seed(settings.rng_seed, j))
        ev.ik_calls += n_calls
        ev.ik_solutions.append(q)
        ev.position_residuals.append(pr)
        ev.orientation_residuals.append(orr)
        ev.reach_excess.append(reach_excess(pr, orr, task, tsl.orientation_deg is not None))
        ev.collision.append(viol)
    ev.torques = torque_table(chain, ev.ik_solutions, payload=task.payload)
    ev.torque_excess = check_torque_limits(chain, ev.torques).excess()
    ev.objective = rms_torque_sum(ev.torques)
    ev.fitness = ev.objective + sum(ev.penalty_terms(w).values())
    return ev


# --- independent re-verification -------------------------------------------

@dataclass
class VerificationReport:
    ok: bool
    position_residuals: list
    orientation_residuals: list
    clearances: list
    collision: list
    torque_margins: list
    assembly_violations: list
    objective: float

    def to_dict(self):
        return {
            "ok": self.ok,
            "position_residuals": [float(x) for x in self.position_residuals],
            "orientation_residuals": [float(x) for x in self.orientation_residuals],
            "clearances": [float(x) for x in self.clearances],
            "collision_violations": [float(x) for x in self.collision],
            "torque_margins": [float(x) for x in self.torque_margins],
            "assembly_violations": list(self.assembly_violations),
            "objective": float(self.objective),
        }


def verify(composition: Composition, ik_solutions, task: TaskSpec, scene: Scene, library: LibraryConfig):
    """Recheck a composition at stored joint solutions without reusing evaluation results.

    The chain is rebuilt from the composition, poses are recomputed by forward
    kinematics and every constraint is evaluated afresh.
    """
    from .library import validate_assembly

    report = validate_assembly(composition.units, library)
    chain = build_chain(composition, library)
    pos, ori, clear, coll = [], [], [], []
    reach_ok = True
    for tsl, target, q in zip(task.tsls, task.targets(), ik_solutions):
        q = np.asarray(q, dtype=float)
        _, pn, on = pose_error(chain, q, target)
        pos.append(pn)
        ori.append(on)
        if pn > task.pos_tol or (tsl.orientation_deg is not None and on > task.ori_tol):
            reach_ok = False
        inside = bool(np.all(q >= chain.joint_limits[:, 0]) and np.all(q <= chain.joint_limits[:, 1]))
        reach_ok &= inside
        c = chain_clearance(chain, q, scene).distance
        clear.append(c)
        coll.append(max(0.0, scene.safety_margin - c))
    table = torque_table(chain, [np.asarray(q, float) for q in ik_solutions], payload=task.payload)
    torque = check_torque_limits(chain, table)
    ok = (report.ok and reach_ok and len(ik_solutions) == len(task.tsls)
          and not any(coll) and torque.ok)
    return VerificationReport(
        ok, pos, ori, clear, coll, list(torque.margins),
        [f"{v.rule}@{v.index}: {v.message}" for v in report.violations],
        rms_torque_sum(table),
    )


# --- GA ---------------------------------------------------------------------

@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    feasible: int
    best_dof: int = 0


@dataclass
class SynthesisResult:
    composition: Optional[Composition]
    chain: object
    ik_solutions: list
    objective_value: float
    fitness: float
    feasible: bool
    genome: Genome
    evaluation: Evaluation
    history: list
    settings: GaSettings
    evaluations: int = 0
    verification: Optional[VerificationReport] = None

    @property
    def constraint_report(self):
        ev = self.evaluation
        return {
            "assembly_ok": ev.assembly_ok,
            "reach_excess": [float(x) for x in ev.reach_excess],
            "position_residuals": [float(x) for x in ev.position_residuals],
            "orientation_residuals": [float(x) for x in ev.orientation_residuals],
            "collision_violation": [float(x) for x in ev.collision],
            "torque_excess": float(ev.torque_excess),
            "penalties": ev.penalty_terms(self.settings.penalty_weights),
        }


_WORKER = {}


def _init_worker(task, scene, library, settings):
    _WORKER.update(task=task, scene=scene, library=library, settings=settings)


def _evaluate_in_worker(genome):
    return evaluate(genome, _WORKER["task"], _WORKER["scene"], _WORKER["library"], _WORKER["settings"])


def _phenotype_key(genome: Genome, settings: GaSettings, library):
    decoded = decode(genome, repair=True, conventional=settings.conventional, library=library)
    return ("infeasible",) if isinstance(decoded, AssemblyInfeasible) else decoded.key()


class _Evaluator:
    """Cached, optionally parallel, population evaluation in deterministic order."""

    def __init__(self, task, scene, library, settings):
        self.args = (task, scene, library, settings)
        self.cache = {}
        self.pool = None
        if settings.workers > 1:
            self.pool = ProcessPoolExecutor(settings.workers, initializer=_init_worker, initargs=self.args)

    def __call__(self, genomes):
        keys = [_phenotype_key(g, self.args[3], self.args[2]) for g in genomes]
        todo, seen = [], set()
        for g, k in zip(genomes, keys):
            if k not in self.cache and k not in seen:
                seen.add(k)
                todo.append((k, g))
        if todo:
            if self.pool is not None:
                results = list(self.pool.map(_evaluate_in_worker, [g for _, g in todo], chunksize=1))
            else:
                results = [evaluate(g, *self.args) for _, g in todo]
            for (k, _), r in zip(todo, results):
                self.cache[k] = r
        return [self.cache[k] for k in keys]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def random_genome(rng, alphabets):
    return np.array([a[rng.integers(len(a))] for a in alphabets], dtype=np.int64)


def _tournament(rng, fitness, size):
    idx = rng.integers(len(fitness), size=size)
    return int(idx[np.argmin(fitness[idx])])


def _next_generation(rng, pop, fitness, settings: GaSettings, alphabets):
    order = np.argsort(fitness, kind="stable")
    nxt = [pop[i].copy() for i in order[:settings.elitism]]
    while len(nxt) < settings.population:
        a = pop[_tournament(rng, fitness, settings.tournament_size)]
        b = pop[_tournament(rng, fitness, settings.tournament_size)]
        if rng.random() < settings.crossover_rate:
            mask = rng.random(GENOME_LENGTH) < 0.5
            c1, c2 = np.where(mask, a, b), np.where(mask, b, a)
        else:
            c1, c2 = a.copy(), b.copy()
        for child in (c1, c2):
            mut = rng.random(GENOME_LENGTH) < settings.mutation_rate
            for i in np.flatnonzero(mut):
                child[i] = alphabets[i][rng.integers(len(alphabets[i]))]
            if len(nxt) < settings.population:
                nxt.append(child)
    return nxt


def synthesize(task: TaskSpec, scene: Scene, library: LibraryConfig, settings: Optional[GaSettings] = None,
               progress=None) -> SynthesisResult:
    """Run the GA and return the best individual ever seen.

    ``progress`` is called with a :class:`GenerationStats` after every
    generation.  The result is infeasible (``feasible=False``) when no
    candidate satisfied every constraint; the best penalized one is returned.
    """
    settings = settings or GaSettings()
    if task.mode == "conventional_only" and not settings.conventional:
        settings = conventional_mode(settings)
    rng = np.random.default_rng(settings.rng_seed)
    alphabets = gene_alphabets(settings)
    pop = [random_genome(rng, alphabets) for _ in range(settings.population)]
    evaluator = _Evaluator(task, scene, library, settings)
    history = []
    best_fit, best_genome, best_eval = math.inf, None, None
    stall = 0
    try:
        for gen in range(settings.generations):
            genomes = [Genome.from_array(p) for p in pop]
            evals = evaluator(genomes)
            fitness = np.array([e.fitness for e in evals])
            i = int(np.argmin(fitness))
            if fitness[i] < best_fit:
                best_fit, best_genome, best_eval = float(fitness[i]), genomes[i], evals[i]
                stall = 0
            else:
                stall += 1
            stats = GenerationStats(gen, best_fit, float(fitness.mean()), sum(e.feasible for e in evals),
                                    best_eval.composition.dof if best_eval.composition else 0)
            history.append(stats)
            log.info("gen %d best %.6g mean %.6g feasible %d", gen, stats.best, stats.mean, stats.feasible)
            if progress is not None:
                progress(stats)
            if stall >= settings.stall_generations or gen == settings.generations - 1:
                break
            pop = _next_generation(rng, pop, fitness, settings, alphabets)
    finally:
        evaluator.close()

    comp = best_eval.composition
    chain = build_chain(comp, library) if comp is not None else None
    result = SynthesisResult(
        composition=comp,
        chain=chain,
        ik_solutions=list(best_eval.ik_solutions),
        objective_value=best_eval.objective,
        fitness=best_fit,
        feasible=best_eval.feasible,
        genome=best_genome,
        evaluation=best_eval,
        history=history,
        settings=settings,
        evaluations=len(evaluator.cache),
    )
    if comp is not None:
        result.verification = verify(comp, best_eval.ik_solutions, task, scene, library)
        if result.feasible and not result.verification.ok:
            log.warning("best candidate failed re-verification; marking infeasible")
            result.feasible = False
    return result


def check_composition(composition: Composition, task: TaskSpec, scene: Scene, library: LibraryConfig,
                      settings: Optional[GaSettings] = None, ik_solutions=None):
    """Re-verify a composition against a task; returns ``(evaluation, report)``.

    Stored ``ik_solutions`` are checked first; when absent or failing, IK is
    solved afresh with ``settings.ik_seeds`` seeds per location.
    """
    from .library import validate_assembly

    settings = settings or GaSettings()
    comp = Composition(composition.units, task.base_pose)
    rep = validate_assembly(comp.units, library)
    if not rep.ok:
        ev = Evaluation(fitness=settings.penalty_weights.assembly, composition=comp, assembly_ok=False,
                        violations=rep.violations)
        chain = build_chain(comp, library)
        sols = [np.zeros(chain.dof) for _ in task.tsls]
        return ev, verify(comp, sols, task, scene, library)
    if ik_solutions is not None and len(ik_solutions) == len(task.tsls):
        report = verify(comp, ik_solutions, task, scene, library)
        if report.ok:
            ev = _evaluation_at(comp, [np.asarray(q, float) for q in ik_solutions], task, scene, library, settings)
            return ev, report
    ev = evaluate_composition(comp, task, scene, library, settings)
    return ev, verify(comp, ev.ik_solutions, task, scene, library)


def _evaluation_at(comp, solutions, task, scene, library, settings):
    """Evaluation of a composition at given joint solutions (no IK)."""
    chain = build_chain(comp, library)
    ev = Evaluation(fitness=math.nan, composition=comp, ik_solutions=list(solutions))
    for tsl, target, q in zip(task.tsls, task.targets(), solutions):
        _, pn, on = pose_error(chain, q, target)
        ev.position_residuals.append(pn)
        ev.orientation_residuals.append(on)
        ev.reach_excess.append(reach_excess(pn, on, task, tsl.orientation_deg is not None))
        ev.collision.append(collision_constraint(chain, q, scene))
    ev.torques = torque_table(chain, solutions, payload=task.payload)
    ev.torque_excess = check_torque_limits(chain, ev.torques).excess()
    ev.objective = rms_torque_sum(ev.torques)
    ev.fitness = ev.objective + sum(ev.penalty_terms(settings.penalty_weights).values())
    return ev
