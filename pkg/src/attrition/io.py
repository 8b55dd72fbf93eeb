"""CSV ingestion and serialization for registrar-style files.

File formats (UTF-8, header row required, "." decimal point):

* ``students.csv``: student_id, race, gender, hispanic (0/1), residency,
  birth_year, previous_schooling, sat_score (blank = missing), act_score
  (blank = missing), transfer_credits, first_term_majors (semicolon-separated),
  fig_member (0/1)
* ``transcripts.csv``: student_id, year, quarter, department, course_number,
  credits, grade (blank = non-numeric mark), mark (letter or P/NP when grade
  blank), remedial (0/1)
* ``degrees.csv``: student_id, year, quarter
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

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

STUDENT_COLUMNS = (
    "student_id",
    "race",
    "gender",
    "hispanic",
    "residency",
    "birth_year",
    "previous_schooling",
    "sat_score",
    "act_score",
    "transfer_credits",
    "first_term_majors",
    "fig_member",
)
TRANSCRIPT_COLUMNS = (
    "student_id",
    "year",
    "quarter",
    "department",
    "course_number",
    "credits",
    "grade",
    "mark",
    "remedial",
)
DEGREE_COLUMNS = ("student_id", "year", "quarter")


class DataFormatError(ValueError):
    """A malformed input row, pinpointed by file, line, and column."""

    def __init__(self, file: str | Path, line: int, column: str, message: str):
        self.file = str(file)
        self.line = line
        self.column = column
        super().__init__(f"{self.file}:{line}: column {column!r}: {message}")


class _RowReader:
    """DictReader wrapper that raises DataFormatError with file/line context."""

    def __init__(self, path: str | Path, required: Sequence[str]):
        self.path = Path(path)
        self.required = tuple(required)

    def rows(self):
        with open(self.path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in self.required if c not in header]
            if missing:
                raise DataFormatError(self.path, 1, missing[0], "missing required column")
            for row in reader:
                yield reader.line_num, row

    def fail(self, line: int, column: str, message: str):
        raise DataFormatError(self.path, line, column, message)

    def parse_int(self, row, line, column, minimum=None, maximum=None) -> int:
        raw = (row.get(column) or "").strip()
        try:
            value = int(raw)
        except ValueError:
            self.fail(line, column, f"expected an integer, got {raw!r}")
        if minimum is not None and value < minimum:
            self.fail(line, column, f"value {value} below minimum {minimum}")
        if maximum is not None and value > maximum:
            self.fail(line, column, f"value {value} above maximum {maximum}")
        return value

    def parse_float(self, row, line, column, minimum=None, maximum=None) -> float:
        raw = (row.get(column) or "").strip()
        try:
            value = float(raw)
        except ValueError:
            self.fail(line, column, f"expected a decimal number, got {raw!r}")
        if minimum is not None and value < minimum:
            self.fail(line, column, f"value {value} below minimum {minimum}")
        if maximum is not None and value > maximum:
            self.fail(line, column, f"value {value} above maximum {maximum}")
        return value

    def parse_flag(self, row, line, column) -> bool:
        raw = (row.get(column) or "").strip()
        if raw not in ("0", "1"):
            self.fail(line, column, f"expected 0 or 1, got {raw!r}")
        return raw == "1"

    def parse_category(self, row, line, column, allowed) -> str:
        raw = (row.get(column) or "").strip()
        if raw not in allowed:
            self.fail(line, column, f"unknown category {raw!r}, expected one of {sorted(allowed)}")
        return raw


def load_students(
    students_file: str | Path,
    transcripts_file: str | Path,
    degrees_file: str | Path | None = None,
    residency_labels: Sequence[str] = DEFAULT_RESIDENCY_LABELS,
) -> list[StudentRecord]:
    """Load and validate student records from CSV files.

    Every transcript row must attach to exactly one student, every student
    needs at least one transcript entry, and ``first_term`` is derived from
    the transcript rather than read. Degree terms are optional; omitting the
    degrees file yields records with empty ``degree_terms``.
    """
    s_reader = _RowReader(students_file, STUDENT_COLUMNS)
    demo_by_id: dict[str, Demographics] = {}
    entry_by_id: dict[str, EntryInfo] = {}
    order: list[str] = []

    for line, row in s_reader.rows():
        sid = (row.get("student_id") or "").strip()
        if not sid:
            s_reader.fail(line, "student_id", "empty student_id")
        if sid in demo_by_id:
            s_reader.fail(line, "student_id", f"duplicate student_id {sid!r}")
        race = s_reader.parse_category(row, line, "race", RACES)
        gender = s_reader.parse_category(row, line, "gender", GENDERS)
        hispanic = s_reader.parse_flag(row, line, "hispanic")
        residency = s_reader.parse_category(row, line, "residency", tuple(residency_labels))
        birth_year = s_reader.parse_int(row, line, "birth_year", minimum=1900)
        prev = s_reader.parse_category(row, line, "previous_schooling", PREVIOUS_SCHOOLING)
        sat_raw = (row.get("sat_score") or "").strip()
        sat = s_reader.parse_int(row, line, "sat_score", 400, 1600) if sat_raw else None
        act_raw = (row.get("act_score") or "").strip()
        act = s_reader.parse_int(row, line, "act_score", 1, 36) if act_raw else None
        credits = s_reader.parse_float(row, line, "transfer_credits", minimum=0.0)
        majors_raw = (row.get("first_term_majors") or "").strip()
        majors = tuple(m for m in majors_raw.split(";") if m) if majors_raw else ()
        fig = s_reader.parse_flag(row, line, "fig_member")
        try:
            demo_by_id[sid] = Demographics(race, gender, hispanic, residency, birth_year)
            entry_by_id[sid] = EntryInfo(prev, sat, act, credits, majors, fig)
        except ValueError as exc:
            s_reader.fail(line, "student_id", str(exc))
        order.append(sid)

    t_reader = _RowReader(transcripts_file, TRANSCRIPT_COLUMNS)
    transcripts: dict[str, list[TranscriptEntry]] = {sid: [] for sid in order}
    for line, row in t_reader.rows():
        sid = (row.get("student_id") or "").strip()
        if sid not in transcripts:
            t_reader.fail(line, "student_id", f"transcript row for unknown student_id {sid!r}")
        year = t_reader.parse_int(row, line, "year", minimum=1900)
        quarter = t_reader.parse_category(row, line, "quarter", QUARTERS)
        department = (row.get("department") or "").strip()
        if not department:
            t_reader.fail(line, "department", "empty department code")
        course_number = t_reader.parse_int(row, line, "course_number", minimum=0)
        credits = t_reader.parse_float(row, line, "credits", minimum=0.0)
        if credits == 0.0:
            # every valid row bears a grade or mark, so it counts as
            # enrollment and needs positive credits
            t_reader.fail(line, "credits", "enrollment-counting entry must have credits > 0")
        grade_raw = (row.get("grade") or "").strip()
        grade = t_reader.parse_float(row, line, "grade", 0.0, 4.0) if grade_raw else None
        mark = (row.get("mark") or "").strip() or None
        if grade is None and mark is None:
            t_reader.fail(line, "grade", "row has neither a numeric grade nor a mark")
        remedial = t_reader.parse_flag(row, line, "remedial")
        transcripts[sid].append(
            TranscriptEntry(sid, Term(year, quarter), department, course_number, credits, grade, mark, remedial)
        )

    degrees: dict[str, list[Term]] = {sid: [] for sid in order}
    if degrees_file is not None:
        d_reader = _RowReader(degrees_file, DEGREE_COLUMNS)
        for line, row in d_reader.rows():
            sid = (row.get("student_id") or "").strip()
            if sid not in degrees:
                d_reader.fail(line, "student_id", f"degree row for unknown student_id {sid!r}")
            year = d_reader.parse_int(row, line, "year", minimum=1900)
            quarter = d_reader.parse_category(row, line, "quarter", QUARTERS)
            degrees[sid].append(Term(year, quarter))

    records = []
    for sid in order:
        if not transcripts[sid]:
            raise ValueError(f"student {sid} has no transcript entries")
        records.append(
            make_student(sid, demo_by_id[sid], entry_by_id[sid], transcripts[sid], degrees[sid])
        )
    return records


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _open_writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_students(records: Iterable[StudentRecord], path: str | Path) -> None:
    fh, writer = _open_writer(Path(path))
    with fh:
        writer.writerow(STUDENT_COLUMNS)
        for r in records:
            d, e = r.demographics, r.entry
            writer.writerow(
                [
                    r.student_id,
                    d.race,
                    d.gender,
                    int(d.hispanic),
                    d.residency,
                    d.birth_year,
                    e.previous_schooling,
                    _fmt(e.sat_score),
                    _fmt(e.act_score),
                    _fmt(e.transfer_credits),
                    ";".join(e.first_term_majors),
                    int(e.fig_member),
                ]
            )


def write_transcripts(records: Iterable[StudentRecord], path: str | Path) -> None:
    fh, writer = _open_writer(Path(path))
    with fh:
        writer.writerow(TRANSCRIPT_COLUMNS)
        for r in records:
            for t in r.transcript:
                writer.writerow(
                    [
                        t.student_id,
                        t.term.year,
                        t.term.quarter,
                        t.department,
                        t.course_number,
                        _fmt(t.credits),
                        _fmt(t.grade),
                        t.mark or "",
                        int(t.remedial),
                    ]
                )


def write_degrees(records: Iterable[StudentRecord], path: str | Path) -> None:
    fh, writer = _open_writer(Path(path))
    with fh:
        writer.writerow(DEGREE_COLUMNS)
        for r in records:
            for term in r.degree_terms:
                writer.writerow([r.student_id, term.year, term.quarter])
