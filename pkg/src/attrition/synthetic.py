"""Synthetic registrar cohorts with a planted, configurable dropout process.

The generator exists so the pipeline can be validated against known ground
truth. Each student draws demographics from registrar-like marginals, a
first-term transcript of 3-6 courses whose grades follow a latent ability,
and a dropout label sampled from

    risk = sigmoid(logit(dropout_base_rate) + sum_k weight_k * signal_k)

where every signal value lies in [0, 1]. Supported signal keys:

* ``gpa:<DEPT>``   first-term credit-weighted GPA in that department / 4.0
                   (a fixed neutral 0.7 when the student has no graded class
                   in the department)
* ``sat``          (true SAT - 400) / 1200
* ``act``          (true ACT - 1) / 35
* ``transfer2yr`` / ``transfer4yr``  previous-schooling indicators
* ``remedial``     indicator for a remedial first-term class

Keeping signals non-negative makes cohort dropout rates monotone in any
single weight when the seed is held fixed: every student's pre-label draws
come from an isolated substream, so only the label comparison moves.

Dropouts enroll in ``clamp(round(a + b * risk + noise), 1, 24)`` distinct
quarters; graduates earn a degree inside their transfer-adjusted window. A
small fraction of non-completions earn a degree strictly outside the window
so the labeling boundary is exercised. FIG membership is drawn independently
of everything else and is the designated pure-noise feature.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .io import write_degrees, write_students, write_transcripts
from .labeling import BASE_WINDOW_QUARTERS
from .records import (
    DEFAULT_RESIDENCY_LABELS,
    GENDERS,
    PREVIOUS_SCHOOLING,
    QUARTERS,
    RACES,
    Demographics,
    EntryInfo,
    StudentRecord,
    Term,
    TranscriptEntry,
    make_student,
)

# First departments get recognizable codes so signal weights and gatekeeper
# groups can name them; the rest are numbered.
CANONICAL_DEPARTMENTS = ("MATH", "CHEM", "PHYS", "BIOL", "ENGL", "PSYCH")

GROUND_TRUTH_COLUMNS = ("student_id", "latent_risk", "true_label", "true_quarters_enrolled")

# Registrar-like marginals (balanced-cohort proportions).
_RACE_P = (0.033, 0.016, 0.228, 0.568, 0.007, 0.148)
_GENDER_P = (0.520, 0.479, 0.001)
_PREV_P = (0.497, 0.255, 0.248)
_RESIDENCY_P = (0.88, 0.06, 0.03, 0.01, 0.005, 0.005, 0.01)
_QUARTER_P = (0.12, 0.08, 0.10, 0.70)  # winter, spring, summer, autumn

_NEUTRAL_GPA_SIGNAL = 0.7


def default_signal_weights() -> dict[str, float]:
    """Protective first-term GPA weights; strongest on math."""
    return {"gpa:MATH": -3.0, "gpa:ENGL": -2.2, "gpa:CHEM": -1.8, "gpa:PSYCH": -1.5}


@dataclass(frozen=True)
class SynthConfig:
    n_students: int = 1000
    n_departments: int = 8
    n_majors: int = 12
    entry_year_range: tuple[int, int] = (1998, 2006)
    # Dropout probability for a student whose signal values are all zero.
    # With the protective default weights the realized rate is far lower;
    # the default lands near the 23.5% non-completion share seen in large
    # public-university cohorts.
    dropout_base_rate: float = 0.982
    signal_weights: dict[str, float] = field(default_factory=default_signal_weights)
    timing_noise_sd: float = 6.6
    grade_noise_sd: float = 0.55
    seed: int = 1998
    # Enrolled-quarter count for dropouts: clamp(round(a + b*risk + noise), 1, 24).
    # Defaults land the dropout cohort near mean 7.35 / SD 5.65 quarters.
    timing_intercept: float = 8.3
    timing_slope: float = -4.0
    late_degree_rate: float = 0.08
    sat_observed_rate: float = 0.40
    act_observed_rate: float = 0.12
    degree_credits: float = 180.0

    def __post_init__(self) -> None:
        if self.n_students < 2:
            raise ValueError("n_students must be >= 2")
        if self.n_departments < 1:
            raise ValueError("n_departments must be >= 1")
        if self.n_majors < 1:
            raise ValueError("n_majors must be >= 1")
        for name in ("dropout_base_rate", "late_degree_rate", "sat_observed_rate", "act_observed_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.timing_noise_sd < 0 or self.grade_noise_sd < 0:
            raise ValueError("noise standard deviations must be non-negative")
        lo, hi = self.entry_year_range
        if lo > hi or lo < 1900:
            raise ValueError(f"bad entry_year_range {self.entry_year_range}")
        object.__setattr__(self, "entry_year_range", (int(lo), int(hi)))
        object.__setattr__(self, "signal_weights", dict(self.signal_weights))

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown synth config fields: {sorted(unknown)}")
        if "entry_year_range" in raw:
            raw = dict(raw)
            raw["entry_year_range"] = tuple(raw["entry_year_range"])
        return cls(**raw)


@dataclass(frozen=True)
class GroundTruth:
    student_id: str
    latent_risk: float
    true_label: str  # "grad" | "nc"
    true_quarters_enrolled: int | None

    def __post_init__(self) -> None:
        if self.true_label not in ("grad", "nc"):
            raise ValueError(f"true_label must be 'grad' or 'nc', got {self.true_label!r}")
        if (self.true_quarters_enrolled is None) != (self.true_label == "grad"):
            raise ValueError("true_quarters_enrolled must be present exactly for non-completions")


def department_codes(n: int) -> tuple[str, ...]:
    codes = list(CANONICAL_DEPARTMENTS[:n])
    codes += [f"DEPT{i:02d}" for i in range(len(codes) + 1, n + 1)]
    return tuple(codes)


def major_codes(n: int) -> tuple[str, ...]:
    return tuple(f"MAJ{i:03d}" for i in range(1, n + 1))


def _parse_signal_keys(cfg: SynthConfig, departments: tuple[str, ...]) -> dict[str, str]:
    """Validate signal keys; returns {key: kind}."""
    kinds: dict[str, str] = {}
    dept_set = set(departments)
    for key in cfg.signal_weights:
        if key.startswith("gpa:"):
            dept = key.split(":", 1)[1]
            if dept not in dept_set:
                raise ValueError(
                    f"signal weight {key!r} names a department outside the vocabulary; "
                    f"n_departments={cfg.n_departments} yields {departments[:6]}..."
                )
            kinds[key] = "gpa"
        elif key in ("sat", "act", "transfer2yr", "transfer4yr", "remedial"):
            kinds[key] = key
        else:
            raise ValueError(f"unknown signal weight key {key!r}")
    return kinds


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _round_grade(g: float) -> float:
    return round(min(4.0, max(0.0, g)) * 10.0) / 10.0


def _enrolled_offsets(rng: np.random.Generator, first_quarter: str, count: int) -> list[int]:
    """Quarter offsets of enrolled terms: consecutive, usually skipping summer."""
    offsets = [0]
    first_q = QUARTERS.index(first_quarter)
    off = 0
    while len(offsets) < count:
        off += 1
        if QUARTERS[(first_q + off) % 4] == "summer" and rng.random() < 0.85:
            continue
        offsets.append(off)
    return offsets


_CREDIT_CHOICES = (2.0, 3.0, 4.0, 5.0)
_CREDIT_P = (0.1, 0.2, 0.3, 0.4)


def _draw_courses(
    rng: np.random.Generator,
    cfg: SynthConfig,
    departments: tuple[str, ...],
    dept_index: dict[str, int],
    signal_departments: tuple[str, ...],
    difficulties: np.ndarray,
    ability: float,
    sid: str,
    term: Term,
    first_term: bool,
    remedial_student: bool,
) -> list[TranscriptEntry]:
    n_courses = int(rng.integers(3, 7)) if first_term else int(rng.integers(2, 6))
    chosen: list[str] = []
    if first_term:
        for dept in signal_departments:
            if len(chosen) < n_courses and rng.random() < 0.85:
                chosen.append(dept)
    remaining = [d for d in departments if d not in chosen]
    fill = n_courses - len(chosen)
    if fill > 0:
        if len(remaining) >= fill:
            picks = rng.choice(len(remaining), size=fill, replace=False)
        else:
            picks = rng.integers(0, max(1, len(remaining)), size=fill) if remaining else []
        chosen.extend(remaining[int(i)] for i in picks)

    n = len(chosen)
    numbers = rng.integers(100, 300, size=n)
    credits = rng.choice(4, size=n, p=_CREDIT_P)
    pass_fail = rng.random(n) < 0.05
    noise = rng.normal(0.0, cfg.grade_noise_sd, size=n)

    entries = []
    for j, dept in enumerate(chosen):
        remedial = first_term and remedial_student and j == 0
        number = int(80 + numbers[j] % 20) if remedial else int(numbers[j])
        raw = 2.9 + 0.55 * ability - difficulties[dept_index[dept]] + noise[j]
        if pass_fail[j]:
            grade = None
            mark = "P" if raw >= 1.5 else "NP"
        else:
            grade = _round_grade(raw)
            mark = None
        entries.append(
            TranscriptEntry(sid, term, dept, number, float(_CREDIT_CHOICES[credits[j]]), grade, mark, remedial)
        )
    return entries


def _first_term_gpas(entries: list[TranscriptEntry]) -> dict[str, float]:
    """Credit-weighted GPA over graded entries, per department."""
    credit_sum: dict[str, float] = {}
    point_sum: dict[str, float] = {}
    for e in entries:
        if e.grade is None:
            continue
        credit_sum[e.department] = credit_sum.get(e.department, 0.0) + e.credits
        point_sum[e.department] = point_sum.get(e.department, 0.0) + e.credits * e.grade
    return {d: point_sum[d] / credit_sum[d] for d in credit_sum if credit_sum[d] > 0}


def generate_cohort(cfg: SynthConfig) -> tuple[list[StudentRecord], list[GroundTruth]]:
    """Generate a cohort plus its dropout ground truth, deterministic in the seed.

    Each student consumes an independent substream of the seeded generator,
    so one student's draws never shift another's.
    """
    departments = department_codes(cfg.n_departments)
    majors = major_codes(cfg.n_majors)
    signal_kinds = _parse_signal_keys(cfg, departments)
    signal_departments = tuple(
        key.split(":", 1)[1] for key, kind in signal_kinds.items() if kind == "gpa"
    )
    base_logit = math.log(cfg.dropout_base_rate / (1.0 - cfg.dropout_base_rate)) if 0 < cfg.dropout_base_rate < 1 else (
        math.inf if cfg.dropout_base_rate >= 1 else -math.inf
    )

    root = np.random.SeedSequence(cfg.seed)
    cohort_rng = np.random.default_rng(root.spawn(1)[0])
    student_seeds = root.spawn(cfg.n_students + 1)[1:]

    difficulties = cohort_rng.uniform(0.0, 0.7, size=cfg.n_departments)
    dept_index = {d: i for i, d in enumerate(departments)}
    major_p = np.array([1.0 / (i + 1.0) for i in range(cfg.n_majors)])
    major_p /= major_p.sum()

    records: list[StudentRecord] = []
    truths: list[GroundTruth] = []
    for i in range(cfg.n_students):
        rng = np.random.default_rng(student_seeds[i])
        sid = f"S{i + 1:06d}"

        race = RACES[int(rng.choice(len(RACES), p=_RACE_P))]
        gender = GENDERS[int(rng.choice(len(GENDERS), p=_GENDER_P))]
        hispanic = bool(rng.random() < 0.045)
        residency = DEFAULT_RESIDENCY_LABELS[int(rng.choice(7, p=_RESIDENCY_P))]
        prev = PREVIOUS_SCHOOLING[int(rng.choice(3, p=_PREV_P))]
        entry_year = int(rng.integers(cfg.entry_year_range[0], cfg.entry_year_range[1] + 1))
        entry_age = int(rng.choice([17, 18, 19, 20, 21, 22, 25], p=[0.08, 0.52, 0.18, 0.08, 0.06, 0.04, 0.04]))
        first_quarter = QUARTERS[int(rng.choice(4, p=_QUARTER_P))]

        ability = float(rng.normal(0.0, 1.0))
        if prev == "Freshman":
            transfer_credits = 0.0
        elif prev == "Transfer2Yr":
            transfer_credits = round(float(rng.uniform(30.0, 110.0)), 1)
        else:
            transfer_credits = round(float(rng.uniform(30.0, 135.0)), 1)

        sat_true = int(min(1600, max(400, round((1050 + 150 * ability + rng.normal(0, 60)) / 10) * 10)))
        act_true = int(min(36, max(1, round(21 + 5 * ability + rng.normal(0, 2)))))
        sat_observed = rng.random() < cfg.sat_observed_rate
        act_observed = rng.random() < cfg.act_observed_rate

        n_declared = min(int(rng.choice([0, 1, 2], p=[0.35, 0.55, 0.10])), cfg.n_majors)
        declared = tuple(
            majors[int(j)] for j in rng.choice(cfg.n_majors, size=n_declared, replace=False, p=major_p)
        )
        fig = bool(rng.random() < 0.15)  # independent of outcome by design
        remedial_student = bool(rng.random() < (0.25 if ability < -1.0 else 0.05))

        first_term = Term(entry_year, first_quarter)
        first_entries = _draw_courses(
            rng, cfg, departments, dept_index, signal_departments, difficulties,
            ability, sid, first_term, True, remedial_student,
        )
        gpas = _first_term_gpas(first_entries)

        logit = base_logit
        for key, weight in cfg.signal_weights.items():
            kind = signal_kinds[key]
            if kind == "gpa":
                dept = key.split(":", 1)[1]
                value = gpas[dept] / 4.0 if dept in gpas else _NEUTRAL_GPA_SIGNAL
            elif kind == "sat":
                value = (sat_true - 400) / 1200.0
            elif kind == "act":
                value = (act_true - 1) / 35.0
            elif kind == "transfer2yr":
                value = 1.0 if prev == "Transfer2Yr" else 0.0
            elif kind == "transfer4yr":
                value = 1.0 if prev == "Transfer4Yr" else 0.0
            else:  # remedial
                value = 1.0 if any(e.remedial for e in first_entries) else 0.0
            logit += weight * value
        risk = _sigmoid(logit) if math.isfinite(logit) else (1.0 if logit > 0 else 0.0)

        is_dropout = bool(rng.random() < risk)
        timing_noise = float(rng.normal(0.0, cfg.timing_noise_sd))
        late_degree = rng.random() < cfg.late_degree_rate

        entry = EntryInfo(prev, sat_true if sat_observed else None, act_true if act_observed else None,
                          transfer_credits, declared, fig)
        demo = Demographics(race, gender, hispanic, residency, entry_year - entry_age)
        allowance = BASE_WINDOW_QUARTERS
        if transfer_credits > 0:
            per_quarter = cfg.degree_credits / 12.0
            allowance = max(1, BASE_WINDOW_QUARTERS - math.floor(transfer_credits / per_quarter + 0.5))

        if is_dropout:
            quarters = int(min(24, max(1, round(cfg.timing_intercept + cfg.timing_slope * risk + timing_noise))))
            offsets = _enrolled_offsets(rng, first_quarter, quarters)
            degree_terms: list[Term] = []
            if late_degree:
                gap = int(rng.integers(1, 9))
                degree_terms = [Term(*divmod_term(first_term, allowance + gap))]
            truths.append(GroundTruth(sid, risk, "nc", quarters))
        else:
            target = int(rng.normal(min(11.0, allowance * 0.8), 2.5))
            degree_offset = min(allowance, max(1, target))
            offsets = [o for o in _enrolled_offsets(rng, first_quarter, degree_offset + 1) if o <= degree_offset]
            degree_terms = [Term(*divmod_term(first_term, degree_offset))]
            truths.append(GroundTruth(sid, risk, "grad", None))

        entries = list(first_entries)
        base_index = 4 * first_term.year + QUARTERS.index(first_quarter)
        for off in offsets[1:]:
            idx = base_index + off
            term = Term(idx // 4, QUARTERS[idx % 4])
            entries.extend(
                _draw_courses(rng, cfg, departments, dept_index, signal_departments, difficulties,
                              ability, sid, term, False, False)
            )
        records.append(make_student(sid, demo, entry, entries, degree_terms))
    return records, truths


def divmod_term(first: Term, offset: int) -> tuple[int, str]:
    """(year, quarter) of the term `offset` quarters after `first`."""
    idx = 4 * first.year + QUARTERS.index(first.quarter) + offset
    return idx // 4, QUARTERS[idx % 4]


def write_cohort(
    records: list[StudentRecord],
    truths: list[GroundTruth],
    directory: str | Path,
) -> dict[str, Path]:
    """Write students/transcripts/degrees/ground_truth CSVs into `directory`."""
    if not records:
        raise ValueError("cannot write an empty cohort")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "students": out / "students.csv",
        "transcripts": out / "transcripts.csv",
        "degrees": out / "degrees.csv",
        "ground_truth": out / "ground_truth.csv",
    }
    write_students(records, paths["students"])
    write_transcripts(records, paths["transcripts"])
    write_degrees(records, paths["degrees"])
    with open(paths["ground_truth"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_COLUMNS)
        for t in truths:
            writer.writerow(
                [t.student_id, repr(t.latent_risk), t.true_label,
                 "" if t.true_quarters_enrolled is None else t.true_quarters_enrolled]
            )
    return paths


def read_ground_truth(path: str | Path) -> list[GroundTruth]:
    truths = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            q = row["true_quarters_enrolled"].strip()
            truths.append(
                GroundTruth(
                    student_id=row["student_id"],
                    latent_risk=float(row["latent_risk"]),
                    true_label=row["true_label"],
                    true_quarters_enrolled=int(q) if q else None,
                )
            )
    return truths
