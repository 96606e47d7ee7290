"""Transformation planning, execution, and structural validation.

A plan is a set of operations drawn from the anchor table's eligible set
and applied in one fixed order. Cheap structural operations (column
removal, column reordering) run locally; the rest are delegated to a chat
provider and their outputs are validated before acceptance. A rejected
step discards the whole generation, so only structurally sound pairs
survive.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from . import prompts
from .llm import ChatProvider, ChatRequest, ExtractionError, extract_json_object
from .seeds import derive_seed
from .serialize import LLM_SAMPLE_ROWS, sample_row_indices, to_llm_json
from .tables import (
    NUMERIC_CELL_FRACTION,
    Table,
    TableError,
    coerce_cell,
    is_numerical_table,
)

MIN_COLUMNS_AFTER_REMOVAL = 2
EMPTY_PLAN_RESAMPLE_LIMIT = 8
DUPLICATE_PLAN_RESAMPLE_LIMIT = 16


class PlanError(ValueError):
    """An operation plan violates a construction invariant."""


class OperationRejected(Exception):
    """One pipeline step produced an output that failed validation."""

    def __init__(self, op: "OperationKind", reason: str) -> None:
        super().__init__(f"{op.value}: {reason}")
        self.op = op
        self.reason = reason


class OperationKind(Enum):
    REMOVAL = "removal"
    CONCATENATION = "concatenation"
    EDIT = "edit"
    CALCULATION = "calculation"
    REORDERING = "reordering"
    UPDATE = "update"

    @property
    def order(self) -> int:
        return _OP_ORDER[self]


# the one fixed execution order; plans are applied in this sequence
OPERATION_ORDER: tuple[OperationKind, ...] = (
    OperationKind.REMOVAL,
    OperationKind.CONCATENATION,
    OperationKind.EDIT,
    OperationKind.CALCULATION,
    OperationKind.REORDERING,
    OperationKind.UPDATE,
)

_OP_ORDER = {op: i for i, op in enumerate(OPERATION_ORDER)}

_LLM_OPS = frozenset(
    {
        OperationKind.CONCATENATION,
        OperationKind.EDIT,
        OperationKind.CALCULATION,
        OperationKind.UPDATE,
    }
)

_OP_INSTRUCTIONS = {
    OperationKind.CONCATENATION: prompts.CONCAT_OPERATION,
    OperationKind.EDIT: prompts.EDIT_OPERATION,
    OperationKind.CALCULATION: prompts.CALC_OPERATION,
    OperationKind.UPDATE: prompts.UPDATE_OPERATION,
}


@dataclass(frozen=True)
class OperationPlan:
    """A non-empty set of operations plus the seed that executes them.

    Stored as a tuple sorted by execution order so iteration order never
    depends on hash randomization.
    """

    ops: tuple[OperationKind, ...]
    seed: int

    def __post_init__(self) -> None:
        unique = sorted(set(self.ops), key=lambda o: o.order)
        object.__setattr__(self, "ops", tuple(unique))
        if not self.ops:
            raise PlanError("a plan must contain at least one operation")
        have = set(self.ops)
        if OperationKind.EDIT in have and OperationKind.CALCULATION in have:
            raise PlanError("edit and calculation are mutually exclusive")
        if OperationKind.REMOVAL in have and OperationKind.CALCULATION in have:
            raise PlanError("removal and calculation are mutually exclusive")

    def op_names(self) -> list[str]:
        return [op.value for op in self.ops]


@dataclass(frozen=True)
class OpOutcome:
    op: OperationKind
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class ChainStep:
    """One executed step: what the validator compared, for later replay."""

    op: OperationKind
    before: Table
    after: Table


@dataclass(frozen=True)
class GenerationResult:
    anchor_id: str
    plan: OperationPlan
    target: Table | None
    per_op_outcomes: tuple[OpOutcome, ...]
    chain: tuple[ChainStep, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.target is not None


def eligible_ops(
    t: Table, numeric_fraction: float = NUMERIC_CELL_FRACTION
) -> set[OperationKind]:
    """Operations applicable to ``t``.

    Concatenation, reordering and update apply to every table. Removal and
    edit apply only to tables with no numerical column; calculation only
    to tables with one. Removal additionally needs at least 3 columns so
    the result keeps at least 2.
    """
    ops = {
        OperationKind.CONCATENATION,
        OperationKind.REORDERING,
        OperationKind.UPDATE,
    }
    if is_numerical_table(t, numeric_fraction):
        ops.add(OperationKind.CALCULATION)
    else:
        ops.add(OperationKind.EDIT)
        if t.n_columns > MIN_COLUMNS_AFTER_REMOVAL:
            ops.add(OperationKind.REMOVAL)
    return ops


def sample_plan(
    t: Table,
    rng_seed: int,
    numeric_fraction: float = NUMERIC_CELL_FRACTION,
) -> OperationPlan:
    """Draw a plan for ``t``: each eligible op kept with probability 1/2.

    An empty draw is resampled a bounded number of times, then falls back
    to the always-eligible update op. Deterministic in (t, rng_seed).
    """
    eligible = sorted(
        eligible_ops(t, numeric_fraction), key=lambda o: o.order
    )
    rng = random.Random(rng_seed)
    for _ in range(EMPTY_PLAN_RESAMPLE_LIMIT):
        picked = [op for op in eligible if rng.random() < 0.5]
        if picked:
            return OperationPlan(ops=tuple(picked), seed=rng_seed)
    return OperationPlan(ops=(OperationKind.UPDATE,), seed=rng_seed)


def apply_removal(t: Table, seed: int) -> Table:
    """Drop 1 or 2 uniformly chosen columns, never going below 2."""
    rng = random.Random(seed)
    budget = t.n_columns - MIN_COLUMNS_AFTER_REMOVAL
    if budget < 1:
        raise OperationRejected(
            OperationKind.REMOVAL, "table has too few columns"
        )
    n_remove = min(rng.randint(1, 2), budget)
    dropped = set(rng.sample(range(t.n_columns), n_remove))
    keep = [j for j in range(t.n_columns) if j not in dropped]
    return Table(
        id=t.id,
        title=t.title,
        description=t.description,
        column_names=tuple(t.column_names[j] for j in keep),
        rows=tuple(tuple(row[j] for j in keep) for row in t.rows),
    )


def apply_reordering(t: Table, seed: int) -> Table:
    """Permute columns uniformly, resampling away the identity.

    Tables with fewer than 2 columns pass through unchanged (the only
    permutation is the identity).
    """
    n = t.n_columns
    if n < 2:
        return t
    rng = random.Random(seed)
    perm = list(range(n))
    rng.shuffle(perm)
    while all(perm[j] == j for j in range(n)):
        rng.shuffle(perm)
    names: list[str] = [""] * n
    for j in range(n):
        names[perm[j]] = t.column_names[j]
    rows = []
    for row in t.rows:
        new_row: list[str] = [""] * n
        for j in range(n):
            new_row[perm[j]] = row[j]
        rows.append(tuple(new_row))
    return Table(
        id=t.id,
        title=t.title,
        description=t.description,
        column_names=tuple(names),
        rows=tuple(rows),
    )


def sampled_subtable(
    t: Table, seed: int, n_rows: int = LLM_SAMPLE_ROWS
) -> Table:
    """The sub-table a chat call actually sees: a seeded row sample."""
    idx = sample_row_indices(t, n_rows, seed)
    return Table(
        id=t.id,
        title=t.title,
        description=t.description,
        column_names=t.column_names,
        rows=tuple(t.rows[i] for i in idx),
    )


def apply_llm_op(
    provider: ChatProvider,
    t: Table,
    op: OperationKind,
    seed: int,
    temperature: float = 0.7,
    max_output_tokens: int = 1024,
) -> Table:
    """Delegate one operation to the chat provider and validate the result.

    The prompt carries a seeded sample of at most 2 rows, so the returned
    table holds only those rows. Output that cannot be parsed or fails
    :func:`validate_transformed` raises :class:`OperationRejected`.
    """
    if op not in _LLM_OPS:
        raise ValueError(f"{op.value} is not a provider-backed operation")
    before = sampled_subtable(t, seed)
    req = ChatRequest(
        user_prompt=prompts.build_edit_prompt(
            to_llm_json(t, seed), _OP_INSTRUCTIONS[op]
        ),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
    )
    completion = provider.chat(req)
    try:
        raw = extract_json_object(completion)
    except ExtractionError as e:
        raise OperationRejected(op, f"extraction failed: {e}") from e
    try:
        after = table_from_llm_json(raw, base=before)
    except TableError as e:
        raise OperationRejected(op, f"malformed table: {e}") from e
    violations = validate_transformed(before, after, op)
    if violations:
        raise OperationRejected(op, "; ".join(violations))
    return after


def table_from_llm_json(raw: str, base: Table) -> Table:
    """Decode a model-emitted table JSON against a base table's identity."""
    obj = json.loads(raw)
    if not isinstance(obj, dict):
        raise TableError("completion is not a JSON object")
    cells = obj.get("cell_data")
    names = obj.get("column_names")
    if not isinstance(cells, list):
        raise TableError("field 'cell_data' must be a list of rows")
    if not isinstance(names, list) or not names:
        raise TableError("field 'column_names' must be a non-empty list")
    rows = []
    for i, row in enumerate(cells):
        if not isinstance(row, list):
            raise TableError(f"field 'cell_data' item {i} is not a list")
        rows.append(tuple(coerce_cell(c) for c in row))
    return Table(
        id=base.id,
        title=coerce_cell(obj.get("title", base.title)),
        description=coerce_cell(obj.get("description", base.description)),
        column_names=tuple(coerce_cell(c) for c in names),
        rows=tuple(rows),
    )


def validate_transformed(
    before: Table, after: Table, op: OperationKind
) -> list[str]:
    """Structural postconditions of one operation; empty list means ok."""
    violations: list[str] = []
    if after.n_rows != before.n_rows:
        violations.append(
            f"row count changed from {before.n_rows} to {after.n_rows}"
        )
        return violations

    w = before.n_columns
    delta = after.n_columns - w

    def prefix_preserved() -> bool:
        if after.column_names[:w] != before.column_names:
            return False
        return all(
            after.rows[i][:w] == before.rows[i]
            for i in range(before.n_rows)
        )

    if op is OperationKind.CONCATENATION:
        if delta not in (1, 2):
            violations.append(f"expected 1 or 2 new columns, got {delta}")
        elif not prefix_preserved():
            violations.append("original columns were not preserved")
    elif op in (OperationKind.EDIT, OperationKind.CALCULATION):
        if delta != 1:
            violations.append(f"expected exactly 1 new column, got {delta}")
        elif not prefix_preserved():
            violations.append("original columns were not preserved")
    elif op is OperationKind.UPDATE:
        if delta != 0:
            violations.append(f"column count changed by {delta}")
        elif after.rows != before.rows:
            violations.append("cell data changed")
        elif (
            after.title == before.title
            and after.description == before.description
            and after.column_names == before.column_names
        ):
            violations.append("no metadata changed")
    elif op is OperationKind.REMOVAL:
        if not (1 <= -delta <= 2):
            violations.append(f"expected 1 or 2 columns removed, got {-delta}")
        elif after.n_columns < MIN_COLUMNS_AFTER_REMOVAL:
            violations.append("fewer than 2 columns remain")
        elif not _is_column_subsequence(before, after):
            violations.append("surviving columns are not a subsequence")
    elif op is OperationKind.REORDERING:
        if delta != 0:
            violations.append(f"column count changed by {delta}")
        elif sorted(_named_columns(before)) != sorted(_named_columns(after)):
            violations.append("columns are not a permutation of the input")
    return violations


def _named_columns(t: Table) -> list[tuple[str, tuple[str, ...]]]:
    return [(t.column_names[j], t.column(j)) for j in range(t.n_columns)]


def _is_column_subsequence(before: Table, after: Table) -> bool:
    remaining = iter(_named_columns(before))
    for col in _named_columns(after):
        for candidate in remaining:
            if candidate == col:
                break
        else:
            return False
    return True


def _check_intermediate(
    t: Table, op: OperationKind, numeric_fraction: float
) -> str:
    """Execution-time precondition of one op against the current table."""
    numerical = is_numerical_table(t, numeric_fraction)
    if op is OperationKind.REMOVAL:
        if numerical:
            return "removal requires a non-numerical table"
        if t.n_columns <= MIN_COLUMNS_AFTER_REMOVAL:
            return "removal requires at least 3 columns"
    elif op is OperationKind.EDIT and numerical:
        return "edit requires a non-numerical table"
    elif op is OperationKind.CALCULATION and not numerical:
        return "calculation requires a numerical table"
    return ""


def run_pipeline(
    provider: ChatProvider,
    anchor: Table,
    n_targets: int = 2,
    seed: int = 0,
    numeric_fraction: float = NUMERIC_CELL_FRACTION,
    temperature: float = 0.7,
    max_output_tokens: int = 1024,
) -> list[GenerationResult]:
    """Generate up to ``n_targets`` transformed versions of ``anchor``.

    Plans are sampled against the anchor and must be mutually distinct
    (bounded resampling; fewer results when the eligible set is too small
    to keep producing new plans). Each plan's ops run in the fixed order,
    every op consuming the previous op's output; any rejected op discards
    that generation, leaving a result with no target and the reason
    recorded.
    """
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    plans: list[OperationPlan] = []
    seen: set[tuple[OperationKind, ...]] = set()
    for k in range(n_targets):
        for attempt in range(DUPLICATE_PLAN_RESAMPLE_LIMIT):
            plan = sample_plan(
                anchor,
                derive_seed(seed, "plan", k, attempt),
                numeric_fraction,
            )
            if plan.ops not in seen:
                seen.add(plan.ops)
                plans.append(plan)
                break

    results = []
    for k, plan in enumerate(plans):
        results.append(
            _run_plan(
                provider,
                anchor,
                plan,
                target_id=f"{anchor.id}-g{k}",
                numeric_fraction=numeric_fraction,
                temperature=temperature,
                max_output_tokens=max_output_tokens,
            )
        )
    return results


def _run_plan(
    provider: ChatProvider,
    anchor: Table,
    plan: OperationPlan,
    target_id: str,
    numeric_fraction: float,
    temperature: float,
    max_output_tokens: float,
) -> GenerationResult:
    current = anchor
    outcomes: list[OpOutcome] = []
    chain: list[ChainStep] = []
    for op in plan.ops:
        reason = _check_intermediate(current, op, numeric_fraction)
        if reason:
            outcomes.append(OpOutcome(op=op, accepted=False, reason=reason))
            return GenerationResult(
                anchor_id=anchor.id,
                plan=plan,
                target=None,
                per_op_outcomes=tuple(outcomes),
                chain=tuple(chain),
            )
        op_seed = derive_seed(plan.seed, "op", op.value)
        try:
            if op is OperationKind.REMOVAL:
                before, after = current, apply_removal(current, op_seed)
            elif op is OperationKind.REORDERING:
                before, after = current, apply_reordering(current, op_seed)
            else:
                before = sampled_subtable(current, op_seed)
                after = apply_llm_op(
                    provider,
                    current,
                    op,
                    op_seed,
                    temperature=temperature,
                    max_output_tokens=max_output_tokens,
                )
        except OperationRejected as e:
            outcomes.append(
                OpOutcome(op=op, accepted=False, reason=e.reason)
            )
            return GenerationResult(
                anchor_id=anchor.id,
                plan=plan,
                target=None,
                per_op_outcomes=tuple(outcomes),
                chain=tuple(chain),
            )
        outcomes.append(OpOutcome(op=op, accepted=True))
        chain.append(ChainStep(op=op, before=before, after=after))
        current = after
    return GenerationResult(
        anchor_id=anchor.id,
        plan=plan,
        target=current.with_id(target_id),
        per_op_outcomes=tuple(outcomes),
        chain=tuple(chain),
    )
