"""Per-item method orchestration and whole-run evaluation.

Each method is a short, strictly ordered stage sequence: build prompt,
complete, extract SQL, repair identifiers. A failure marks the item
with the first failing stage and counts against QE; later stages do not
run. The multi-prompt variant records the intermediate simplified SQL
even when translation later fails.

Open-book runs swap the item's home schema for a TablePool assembled
from an external retrieval list; everything downstream is unchanged.
Predictions always execute against the item's home database, so a pool
that lacks the right tables shows up as execution failure rather than
being silently excused.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .correction import (
    CorrectionReport,
    correct_identifiers,
    correct_identifiers_simplified,
)
from .dataset import DatasetBundle, DatasetError, EvalItem, RunConfig
from .evaluation import (
    COMPARISON_SEMANTICS,
    OK,
    RUNTIME_ERROR,
    EvalRecord,
    ExecOutcome,
    compare_results,
    execute,
    has_top_level_order_by,
    precision_recall,
)
from .llm import (
    ExtractionError,
    LlmClient,
    LlmError,
    extract_sql,
    extract_sql_blocks,
    trim_sql,
)
from .prompting import (
    baseline_schema_block,
    build_baseline_prompt,
    build_mp_step1_prompt,
    build_mp_step2_prompt,
    build_sp_prompt,
    template_hashes,
)
from .schema import DatabaseSchema, SchemaError, TableDef, simplify_schema
from .sqlref import RefSet, extract_refs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictedQuery:
    method: str
    intermediate_sql: str | None = None
    final_sql: str | None = None
    intermediate_report: CorrectionReport | None = None
    final_report: CorrectionReport | None = None
    completions: tuple[str, ...] = ()
    failed: bool = False
    failure_stage: str | None = None
    failure_reason: str | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.failed == (self.final_sql is not None):
            raise ValueError("final_sql must be present exactly when the item did not fail")

    def to_dict(self) -> dict:
        def report(r: CorrectionReport | None):
            if r is None:
                return None
            return {
                "substitutions": [
                    [s.original, s.replacement, s.distance, s.position]
                    for s in r.substitutions
                ],
                "unresolved": list(r.unresolved),
            }

        return {
            "method": self.method,
            "intermediate_sql": self.intermediate_sql,
            "final_sql": self.final_sql,
            "intermediate_report": report(self.intermediate_report),
            "final_report": report(self.final_report),
            "completions": list(self.completions),
            "failed": self.failed,
            "failure_stage": self.failure_stage,
            "failure_reason": self.failure_reason,
            "warnings": list(self.warnings),
        }


def _failure(method: str, stage: str, reason: str, **kw) -> PredictedQuery:
    return PredictedQuery(
        method=method,
        failed=True,
        failure_stage=stage,
        failure_reason=reason,
        **kw,
    )


_STAGE_ERRORS = (LlmError,)


def run_unjoin_mp(
    item: EvalItem,
    db: DatabaseSchema,
    client: LlmClient,
    cache_mode: str,
    template_dir: str | Path | None = None,
    descriptions: dict[str, str] | None = None,
) -> PredictedQuery:
    method = "unjoin-mp"
    simplified = simplify_schema(db, descriptions)
    question = item.prompt_question
    prompt1 = build_mp_step1_prompt(simplified, question, template_dir)
    try:
        completion1 = client.complete(prompt1, cache_mode)
    except _STAGE_ERRORS as exc:
        return _failure(method, "step1-complete", str(exc))
    try:
        raw1 = extract_sql(completion1)
    except ExtractionError as exc:
        return _failure(method, "step1-extract", str(exc), completions=(completion1,))
    sql1, report1 = correct_identifiers_simplified(raw1, simplified)

    prompt2 = build_mp_step2_prompt(simplified, sql1, question, db, template_dir)
    try:
        completion2 = client.complete(prompt2, cache_mode)
    except _STAGE_ERRORS as exc:
        return _failure(
            method,
            "step2-complete",
            str(exc),
            intermediate_sql=sql1,
            intermediate_report=report1,
            completions=(completion1,),
        )
    try:
        raw2 = extract_sql(completion2)
    except ExtractionError as exc:
        return _failure(
            method,
            "step2-extract",
            str(exc),
            intermediate_sql=sql1,
            intermediate_report=report1,
            completions=(completion1, completion2),
        )
    final, report2 = correct_identifiers(raw2, db)
    return PredictedQuery(
        method=method,
        intermediate_sql=sql1,
        final_sql=final,
        intermediate_report=report1,
        final_report=report2,
        completions=(completion1, completion2),
    )


def run_unjoin_sp(
    item: EvalItem,
    db: DatabaseSchema,
    client: LlmClient,
    cache_mode: str,
    template_dir: str | Path | None = None,
    descriptions: dict[str, str] | None = None,
) -> PredictedQuery:
    method = "unjoin-sp"
    simplified = simplify_schema(db, descriptions)
    prompt = build_sp_prompt(simplified, item.prompt_question, db, template_dir)
    try:
        completion = client.complete(prompt, cache_mode)
    except _STAGE_ERRORS as exc:
        return _failure(method, "complete", str(exc))
    blocks = extract_sql_blocks(completion)
    warnings: list[str] = []
    intermediate_raw: str | None = None
    if len(blocks) >= 2:
        # The template orders step 1 before step 2, so the last block is
        # the translated query and the first is the simplified one.
        intermediate_raw = trim_sql(blocks[0])
        final_raw = trim_sql(blocks[-1])
    elif len(blocks) == 1:
        final_raw = trim_sql(blocks[0])
        warnings.append("single fenced block in completion; intermediate query missing")
        log.warning("%s: %s", item.item_id, warnings[-1])
    else:
        try:
            final_raw = extract_sql(completion)
        except ExtractionError as exc:
            return _failure(method, "extract", str(exc), completions=(completion,))
        warnings.append("no fenced blocks in completion; used keyword fallback")
    intermediate = None
    intermediate_report = None
    if intermediate_raw:
        intermediate, intermediate_report = correct_identifiers_simplified(
            intermediate_raw, simplified
        )
    final, final_report = correct_identifiers(final_raw, db)
    return PredictedQuery(
        method=method,
        intermediate_sql=intermediate,
        final_sql=final,
        intermediate_report=intermediate_report,
        final_report=final_report,
        completions=(completion,),
        warnings=tuple(warnings),
    )


def run_baseline(
    item: EvalItem,
    db: DatabaseSchema,
    client: LlmClient,
    cache_mode: str,
    kind: str,
    template_dir: str | Path | None = None,
) -> PredictedQuery:
    schema_block = baseline_schema_block(kind, db)
    prompt = build_baseline_prompt(kind, schema_block, item.prompt_question, template_dir)
    try:
        completion = client.complete(prompt, cache_mode)
    except _STAGE_ERRORS as exc:
        return _failure(kind, "complete", str(exc))
    try:
        raw = extract_sql(completion)
    except ExtractionError as exc:
        return _failure(kind, "extract", str(exc), completions=(completion,))
    final, report = correct_identifiers(raw, db)
    return PredictedQuery(
        method=kind,
        final_sql=final,
        final_report=report,
        completions=(completion,),
    )


def run_method(
    method: str,
    item: EvalItem,
    db: DatabaseSchema,
    client: LlmClient,
    cache_mode: str,
    template_dir: str | Path | None = None,
    descriptions: dict[str, str] | None = None,
) -> PredictedQuery:
    if method == "unjoin-sp":
        return run_unjoin_sp(item, db, client, cache_mode, template_dir, descriptions)
    if method == "unjoin-mp":
        return run_unjoin_mp(item, db, client, cache_mode, template_dir, descriptions)
    if method in ("cot", "cot-ss"):
        return run_baseline(item, db, client, cache_mode, method, template_dir)
    raise DatasetError(f"unknown method {method!r}")


# ----- open-book table pools -----


@dataclass(frozen=True)
class TablePool:
    schema: DatabaseSchema
    # pool table name -> (source db_id, original table name)
    provenance: dict


class PoolError(ValueError):
    pass


def assemble_pool(
    retrieved: list[tuple[str, str, float]],
    catalogue: dict[str, DatabaseSchema],
    topk: int = 10,
) -> TablePool:
    """Build one synthetic schema from the top-k retrieved tables.

    Name collisions across source databases are resolved by suffixing
    the source db_id, deterministically in list order. Foreign keys
    survive only when both endpoint tables made it into the pool from
    the same source database.
    """
    ranked = sorted(enumerate(retrieved), key=lambda e: (-e[1][2], e[0]))
    picked = [entry for _, entry in ranked[: max(1, topk)]]
    tables = []
    provenance = {}
    names_lower: set[str] = set()
    chosen: dict[tuple[str, str], str] = {}  # (db_id, table_lower) -> pool name
    for db_id, table_name, _ in picked:
        src = catalogue.get(db_id)
        if src is None:
            raise PoolError(f"retrieved table references unknown database {db_id!r}")
        table = src.find_table(table_name)
        if table is None:
            raise PoolError(f"retrieved table {db_id}.{table_name} not in catalogue")
        key = (db_id, table.name.lower())
        if key in chosen:
            continue
        pool_name = table.name
        if pool_name.lower() in names_lower:
            pool_name = f"{table.name}__{db_id}"
        if pool_name.lower() in names_lower:
            continue
        names_lower.add(pool_name.lower())
        chosen[key] = pool_name
        if pool_name == table.name:
            tables.append(table)
        else:
            tables.append(TableDef(pool_name, table.columns))
        provenance[pool_name] = (db_id, table.name)
    if not tables:
        raise PoolError("retrieval list produced an empty pool")
    fks = []
    for db_id, src in catalogue.items():
        for t1, c1, t2, c2 in src.foreign_keys:
            p1 = chosen.get((db_id, t1.lower()))
            p2 = chosen.get((db_id, t2.lower()))
            if p1 and p2:
                fks.append((p1, c1, p2, c2))
    try:
        schema = DatabaseSchema("pool", tuple(tables), tuple(fks))
    except SchemaError as exc:
        raise PoolError(f"pool assembly failed: {exc}") from exc
    return TablePool(schema, provenance)


# ----- full-run evaluation -----


def _empty_refset() -> RefSet:
    return RefSet(frozenset(), frozenset())


def _safe_refs(sql: str | None, db: DatabaseSchema) -> RefSet:
    if not sql:
        return _empty_refset()
    try:
        return extract_refs(sql, db)
    except ValueError:
        return _empty_refset()


def evaluate_item(
    item: EvalItem,
    prediction: PredictedQuery,
    home_db: DatabaseSchema,
    pred_db: DatabaseSchema,
    db_file: Path | None,
    exec_timeout_s: float,
) -> EvalRecord:
    """Execute gold and prediction, extract references, score one item."""
    if db_file is not None and db_file.exists():
        gold_exec = execute(item.gold_sql, db_file, exec_timeout_s)
        if prediction.final_sql:
            pred_exec = execute(prediction.final_sql, db_file, exec_timeout_s)
        else:
            pred_exec = None
    else:
        gold_exec = ExecOutcome(status=RUNTIME_ERROR, error="database file missing")
        pred_exec = None
    qe = pred_exec is not None and pred_exec.status == OK
    em = qe and compare_results(
        gold_exec, pred_exec, has_top_level_order_by(item.gold_sql)
    )
    gold_refs = _safe_refs(item.gold_sql, home_db)
    pred_refs = _safe_refs(prediction.final_sql, pred_db)
    t_prec, t_rec = precision_recall(pred_refs.tables, gold_refs.tables)
    c_prec, c_rec = precision_recall(pred_refs.columns, gold_refs.columns)
    return EvalRecord(
        item_id=item.item_id,
        method=prediction.method,
        db_id=item.db_id,
        question=item.question,
        gold_sql=item.gold_sql,
        prediction=prediction.to_dict(),
        gold_exec=gold_exec,
        pred_exec=pred_exec,
        qe=qe,
        em=em,
        gold_tables=tuple(sorted(gold_refs.tables)),
        gold_columns=tuple(sorted(gold_refs.columns)),
        pred_tables=tuple(sorted(pred_refs.tables)),
        pred_columns=tuple(sorted(pred_refs.columns)),
        table_precision=t_prec,
        table_recall=t_rec,
        column_precision=c_prec,
        column_recall=c_rec,
        gold_table_count=item.gold_table_count
        if item.gold_table_count is not None
        else len(gold_refs.tables),
    )


def run_evaluation(
    bundle: DatasetBundle,
    items: list[EvalItem],
    config: RunConfig,
    client: LlmClient,
    retrieval: dict[str, list[tuple[str, str, float]]] | None = None,
) -> tuple[list[EvalRecord], dict]:
    """Run one method over items; returns records in item order plus meta."""
    template_dir = config.template_dir or None

    def one(index_item: tuple[int, EvalItem]):
        index, item = index_item
        home_db = bundle.catalogue[item.db_id]
        descriptions = bundle.descriptions.get(item.db_id)
        if retrieval is not None:
            listed = retrieval.get(item.item_id)
            if not listed:
                prediction = _failure(
                    config.method, "retrieval", f"no retrieval list for {item.item_id}"
                )
                return index, evaluate_item(
                    item, prediction, home_db, home_db,
                    bundle.db_paths.get(item.db_id), config.exec_timeout_s,
                )
            try:
                pool = assemble_pool(listed, bundle.catalogue, config.topk)
            except PoolError as exc:
                prediction = _failure(config.method, "retrieval", str(exc))
                return index, evaluate_item(
                    item, prediction, home_db, home_db,
                    bundle.db_paths.get(item.db_id), config.exec_timeout_s,
                )
            pred_db = pool.schema
            descriptions = None
        else:
            pred_db = home_db
        prediction = run_method(
            config.method, item, pred_db, client, config.cache_mode,
            template_dir, descriptions,
        )
        record = evaluate_item(
            item, prediction, home_db, pred_db,
            bundle.db_paths.get(item.db_id), config.exec_timeout_s,
        )
        return index, record

    workers = max(1, config.workers)
    if workers == 1:
        results = [one(pair) for pair in enumerate(items)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, enumerate(items)))
    results.sort(key=lambda pair: pair[0])
    records = [record for _, record in results]
    meta = {
        "config": config.to_dict(),
        "template_hashes": template_hashes(template_dir),
        "comparison": COMPARISON_SEMANTICS,
        "n_items": len(records),
    }
    return records, meta
