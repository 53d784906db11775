import argparse
import logging
import sys
from logging import getLogger
from pathlib import Path

import config
from config import (
    ITEM_VECTORS_FILE,
    MODEL_FILE,
    PCO_FILE,
    SELECTION_FILE,
    TABLE_LABELS,
    UPL_VALUES,
    USER_VECTORS_FILE,
)
from dataset import Dataset, dump_split, index_dataset, load_split, read_ratings, split_upl
from embedding import factorize_pco, factorize_user_item, load_embedding, save_embedding
from errors import ConfigError, GemRankError, UnknownUserError
from mlp import save_model, write_selection
from pco import Basis, build_pco, dump_pco, load_pco
from pipeline import (
    LABELLED_VARIANTS,
    FittedPipeline,
    Variant,
    fit_mlp,
    load_pipeline_artifacts,
    save_pipeline_artifacts,
    seeded_spec,
    spec_for_label,
    vectors_from_embedding,
)
from ranking_eval import (
    EvalReport,
    evaluate,
    evaluate_split,
    rank_user,
    reference_table,
    write_reports,
)
from resource_utils import load_env_file, resolve_data_path
from run_config import RunConfig, build_run_config, load_config_file, write_effective_config
from utils import derive_seed, read_vectors, write_vectors

logger = getLogger(__name__)


def setup_logging(out_dir: Path, verbose: bool = False) -> Path | None:
    """Log to <out_dir>/GEMRANK_LOG_TARGET and the console; console only on failure."""
    level = logging.DEBUG if verbose else getattr(logging, config.GEMRANK_LOG_LEVEL, logging.INFO)
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / config.GEMRANK_LOG_TARGET
        logging.basicConfig(
            level=level,
            format=log_format,
            handlers=[logging.FileHandler(log_path), logging.StreamHandler()],
            force=True,
        )
        return log_path
    except OSError as e:
        print(f"❌ Failed to configure file logging: {e}")
        logging.basicConfig(
            level=level, format=log_format, handlers=[logging.StreamHandler()], force=True
        )
        return None


def read_dataset(run: RunConfig) -> Dataset:
    path = resolve_data_path(run.data.path)
    records = read_ratings(path, delimiter=run.data.delimiter, r_max=run.data.r_max)
    return index_dataset(records, r_max=run.data.r_max)


def _split_config(run: RunConfig, repetition: int = 0):
    return run.split.model_copy(update={"seed": derive_seed(run.seed, f"split/{repetition}")})


def run_split(run: RunConfig) -> None:
    split = split_upl(read_dataset(run), _split_config(run))
    dump_split(split, run.out_dir)
    print(f"✅ Split written: {len(split.included_users)} users, UPL={split.upl}")


def run_pco(run: RunConfig) -> None:
    split = load_split(run.out_dir, r_max=run.data.r_max)
    pco = build_pco(split.train, run.basis, run.pco.log_base)
    dump_pco(pco, run.out_dir / PCO_FILE)
    print(f"✅ {run.basis.value}-based PCO written: n={pco.n}, {pco.nnz // 2} pairs")


def run_embed(run: RunConfig) -> None:
    split = load_split(run.out_dir, r_max=run.data.r_max)
    spec = seeded_spec(run.pipeline_spec(), run.seed, 0)

    if run.variant == Variant.USER_ITEM_MF:
        user_vectors, item_vectors = factorize_user_item(split, spec.embedding)
        write_vectors(run.out_dir / USER_VECTORS_FILE, user_vectors)
        write_vectors(run.out_dir / ITEM_VECTORS_FILE, item_vectors)
        print("✅ User-item vectors written")
        return

    n = split.train.num_items if run.basis == Basis.ITEM else split.train.num_users
    pco = load_pco(run.out_dir / PCO_FILE, n, run.basis, run.pco.log_base)
    model, trace = factorize_pco(pco, spec.embedding)
    save_embedding(model, run.out_dir)
    print(
        f"✅ Embeddings written: cost {trace.cost_per_epoch[0]:.4f} -> "
        f"{trace.cost_per_epoch[-1]:.4f}"
    )


def run_aggregate(run: RunConfig) -> None:
    if run.variant == Variant.USER_ITEM_MF:
        print("🔧 user-item-mf has no aggregation stage; vectors come from `embed`")
        return
    split = load_split(run.out_dir, r_max=run.data.r_max)
    embedding = load_embedding(run.out_dir, run.basis)
    user_vectors, item_vectors, aggregated = vectors_from_embedding(
        embedding, split, run.pipeline_spec()
    )
    write_vectors(run.out_dir / USER_VECTORS_FILE, user_vectors)
    write_vectors(run.out_dir / ITEM_VECTORS_FILE, item_vectors)
    print(f"✅ {aggregated.aggregation.value} vectors written")


def run_train_mlp(run: RunConfig) -> None:
    if run.variant == Variant.GEMRANK_SIMPLE:
        print("🔧 gemrank-simple ranks by cosine similarity; no MLP to train")
        return
    split = load_split(run.out_dir, r_max=run.data.r_max)
    user_vectors = read_vectors(run.out_dir / USER_VECTORS_FILE)
    item_vectors = read_vectors(run.out_dir / ITEM_VECTORS_FILE)
    spec = seeded_spec(run.pipeline_spec(), run.seed, 0)
    model, selection = fit_mlp(split, user_vectors, item_vectors, spec.mlp)
    save_model(model, run.out_dir / MODEL_FILE)
    write_selection(selection, run.out_dir / SELECTION_FILE)
    print(f"✅ MLP written: hidden={selection.chosen_hidden}")


def _finish_reports(run: RunConfig, reports: list[EvalReport], show_reference: bool) -> None:
    table = write_reports(reports, run.out_dir)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if show_reference:
        for upl in sorted({report.upl for report in reports}):
            try:
                print(f"\nPublished MovieLens-100K results, UPL={upl}:")
                print(reference_table(upl).to_string(index=False))
            except ValueError as e:
                print(f"🔧 {e}")


def run_evaluate(run: RunConfig, show_reference: bool = False) -> EvalReport:
    """Evaluate the artifacts already in the output directory (one repetition)."""
    spec = run.pipeline_spec()
    split, fitted = load_pipeline_artifacts(run.out_dir, spec, run.data.r_max)
    means = evaluate_split(split, fitted, run.eval.n_values, run.threads)
    report = EvalReport.from_repetitions(
        spec.label, split.upl, run.eval.n_values, {n: [means[n]] for n in run.eval.n_values}
    )
    _finish_reports(run, [report], show_reference)
    return report


def run_pipeline(run: RunConfig, show_reference: bool = False) -> EvalReport:
    """
    Split -> PCO -> factorize -> aggregate -> MLP (unless simple) -> evaluate, repeated
    over `eval.repetitions` seeded splits.

    Artifacts of the first repetition and the report files are written to out_dir.
    """
    write_effective_config(run)
    dataset = read_dataset(run)

    def persist_first(repetition: int, split, fitted: FittedPipeline) -> None:
        if repetition == 0:
            save_pipeline_artifacts(split, fitted, run.out_dir)

    report = evaluate(
        dataset,
        run.pipeline_spec(),
        run.split,
        n_values=run.eval.n_values,
        repetitions=run.eval.repetitions,
        seed=run.seed,
        threads=run.threads,
        on_repetition=persist_first,
    )
    _finish_reports(run, [report], show_reference)
    return report


def run_tables(
    run: RunConfig,
    upls: list[int] | tuple[int, ...] = UPL_VALUES,
    labels: list[str] | tuple[str, ...] = TABLE_LABELS,
    show_reference: bool = False,
) -> list[EvalReport]:
    """
    Evaluate every labelled variant at every UPL and write one report row per pair.

    Split seeds depend only on the global seed and the repetition, so all variants at
    one UPL are scored on the same splits. No per-run artifacts are kept.
    """
    write_effective_config(run)
    dataset = read_dataset(run)
    base = run.pipeline_spec()

    reports = []
    for upl in upls:
        split_config = run.split.model_copy(update={"upl": upl})
        for label in labels:
            print(f"🔧 {label}, UPL={upl}")
            reports.append(
                evaluate(
                    dataset,
                    spec_for_label(base, label),
                    split_config,
                    n_values=run.eval.n_values,
                    repetitions=run.eval.repetitions,
                    seed=run.seed,
                    threads=run.threads,
                )
            )
    _finish_reports(run, reports, show_reference)
    return reports


def recommend(run: RunConfig, user_id: str, top_n: int) -> list[tuple[str, float]]:
    """
    Rank every item outside the user's training profile with the stored artifacts.

    Returns:
        Up to top_n (external item id, score) pairs, best first
    """
    if top_n < 0:
        raise ValueError(f"top_n must be >= 0, got {top_n}")
    split, fitted = load_pipeline_artifacts(run.out_dir, run.pipeline_spec(), run.data.r_max)
    train = split.train
    try:
        user = train.user_ids.index(user_id)
    except ValueError:
        raise UnknownUserError(f"Unknown user id: {user_id}") from None
    if user not in split.included_users:
        raise UnknownUserError(
            f"User {user_id} has too few ratings for UPL={split.upl} and no training profile"
        )
    if top_n == 0:
        return []

    rated = {item for item, _ in train.user_profiles[user]}
    candidates = [item for item in range(train.num_items) if item not in rated]
    if not candidates:
        return []
    ranking = rank_user(fitted, user, candidates)
    return [(train.item_ids[item], score) for item, score in ranking.entries[:top_n]]


STAGES = {
    "split": run_split,
    "pco": run_pco,
    "embed": run_embed,
    "aggregate": run_aggregate,
    "train-mlp": run_train_mlp,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--data", help="Rating log (falls back to GEMRANK_DATA_DIR)")
    common.add_argument("--upl", type=int, help="Ratings per user kept for training")
    common.add_argument("--basis", choices=[b.value for b in Basis])
    common.add_argument("--variant", choices=[v.value for v in Variant])
    common.add_argument("--seed", type=int, help="Global seed")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--threads", type=int, help="Evaluation worker threads")
    common.add_argument("--repetitions", type=int, help="Seeded splits to evaluate")
    common.add_argument("--verbose", action="store_true", help="DEBUG logging")

    parser = argparse.ArgumentParser(prog="gemrank", description="GEMRank collaborative ranking")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        commands.add_parser(name, parents=[common], help=f"Run the {name} stage")
    for name in ("evaluate", "run"):
        command = commands.add_parser(name, parents=[common], help=f"{name} and report NDCG")
        command.add_argument(
            "--reference", action="store_true", help="Also print published reference results"
        )
    command = commands.add_parser(
        "tables", parents=[common], help="NDCG grid over UPL values and variants"
    )
    command.add_argument(
        "--upls",
        default=",".join(str(u) for u in UPL_VALUES),
        help="Comma-separated UPL values",
    )
    command.add_argument(
        "--labels",
        default=",".join(TABLE_LABELS),
        help=f"Comma-separated variants out of: {', '.join(LABELLED_VARIANTS)}",
    )
    command.add_argument(
        "--reference", action="store_true", help="Also print published reference results"
    )
    command = commands.add_parser("recommend", parents=[common], help="Top-N items for a user")
    command.add_argument("--user", required=True, help="External user id")
    command.add_argument("--top-n", type=int, default=10)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {
        "data.path": args.data,
        "split.upl": args.upl,
        "basis": args.basis,
        "variant": args.variant,
        "seed": args.seed,
        "out_dir": args.out,
        "threads": args.threads,
        "eval.repetitions": args.repetitions,
    }
    return build_run_config(file_values, overrides)


def parse_grid(upls: str, labels: str) -> tuple[list[int], list[str]]:
    """UPL values and variant labels of the `tables` command."""
    try:
        upl_values = [int(v) for v in upls.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--upls must be comma-separated integers, got {upls!r}") from None
    if not upl_values or any(upl < 1 for upl in upl_values):
        raise ConfigError(f"--upls needs at least one value >= 1, got {upls!r}")
    label_values = [v.strip() for v in labels.split(",") if v.strip()]
    unknown = [label for label in label_values if label not in LABELLED_VARIANTS]
    if not label_values or unknown:
        raise ConfigError(
            f"--labels must name variants out of {list(LABELLED_VARIANTS)}, got {labels!r}"
        )
    return upl_values, label_values


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    upls: list[int] = []
    labels: list[str] = []

    try:
        run = config_from_args(args)
        if args.command == "tables":
            upls, labels = parse_grid(args.upls, args.labels)
    except ConfigError as e:
        print(f"❌ Configuration error: {e}")
        return 2

    env_loaded = load_env_file()
    log_path = setup_logging(run.out_dir, args.verbose)
    logger.info(f"gemrank {args.command}: log file {log_path}, .env loaded: {env_loaded}")
    print(
        f"🔧 {args.command}: basis={run.basis.value}, variant={run.variant.value}, "
        f"seed={run.seed}"
    )

    try:
        write_effective_config(run)
        if args.command in STAGES:
            STAGES[args.command](run)
        elif args.command == "evaluate":
            run_evaluate(run, args.reference)
        elif args.command == "run":
            run_pipeline(run, args.reference)
        elif args.command == "tables":
            run_tables(run, upls, labels, args.reference)
        else:
            for item_id, score in recommend(run, args.user, args.top_n):
                print(f"{item_id}\t{score:.6f}")
    except ConfigError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"❌ {args.command} failed: {e}")
        return 2
    except (GemRankError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"❌ {args.command} failed: {e}")
        return 1

    print(f"✅ {args.command} finished; outputs in {run.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
