"""Command-line front end: generate, annotate, train, evaluate, detect, kappa, pipeline.

Each ``cmd_*`` function is usable from Python as well; ``main`` wraps them
with argument parsing and maps failures to exit codes (0 ok, 1 usage,
2 data error, 3 internal error).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
import traceback
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import GenSpec, generate_corpus
from .errors import DataError, SchemaMismatchError
from .explain import build_report, decision_paths, explain_response
from .features import FeatureSchema, Vocabulary, build_vocabulary, extract_all, featurize
from .forest import Hyperparams, default_grid, grid_search, load_model, predict, save_model, train_forest
from .metrics import ConfusionMatrix, cohen_kappa, evaluate
from .tagger import TaggerConfig, TaggerMode, annotate_all, load_lexicons
from .taxonomy import ChatbotDA, UserDA, load_ruleset
from .transcript import CLASS_ORDER, Appropriateness, load_transcripts, write_transcripts

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    in_path: Path | None = None
    out_path: Path | None = None
    model_path: Path | None = None
    ruleset_path: Path | None = None
    lexicons_path: Path | None = None
    seed: int = 0
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    tagger: TaggerMode = TaggerMode.HEURISTIC
    grid: str = "default"
    format: str = "md"
    threads: int = 1
    strict: bool = True

    def __post_init__(self):
        for name in ("train_fraction", "dev_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie strictly between 0 and 1, got {value}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.format not in ("md", "json"):
            raise ValueError(f"format must be 'md' or 'json', got {self.format!r}")
        object.__setattr__(self, "tagger", TaggerMode(self.tagger))

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                flag = {"in_path": "--in", "out_path": "--out", "model_path": "--model"}[name]
                raise _UsageError(f"{flag} is required for this command")


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared plumbing


def _resources(config):
    ruleset = load_ruleset(config.ruleset_path)
    lexicons = load_lexicons(config.lexicons_path)
    return ruleset, lexicons, TaggerConfig(mode=config.tagger)


def _load(config):
    dialogues = load_transcripts(config.in_path, strict=config.strict)
    for line, message in getattr(dialogues, "skipped", []):
        print(f"warning: skipped record: {message}", file=sys.stderr)
    return list(dialogues)


def _fill_missing(dialogues, config):
    """Add DAs only where the transcript has none, so gold annotations win."""
    ruleset, lexicons, tagger = _resources(config)
    return annotate_all(dialogues, ruleset, tagger, lexicons, overwrite_user=False, threads=config.threads)


def split_dialogues(dialogues, seed, train_fraction=0.8, dev_fraction=0.1):
    """Seeded dialogue-level split into (train, dev, test); dev comes out of train."""
    order = list(range(len(dialogues)))
    random.Random(seed).shuffle(order)
    n_train = round(train_fraction * len(order))
    n_test = len(order) - n_train
    n_dev = round(dev_fraction * n_train)
    if n_test < 1 or n_dev < 1 or n_train - n_dev < 1:
        raise DataError(
            f"insufficient data to split: {len(order)} dialogue(s) cannot fill train, dev and test"
        )
    test = [dialogues[i] for i in order[:n_test]]
    train = [dialogues[i] for i in order[n_test:]]
    return train[n_dev:], train[:n_dev], test


def _labelled(dataset, what):
    if len(dataset) == 0:
        raise DataError(f"no chatbot responses in the {what} data")
    if not dataset.labelled:
        missing = [k for k, y in zip(dataset.keys, dataset.y) if y < 0]
        raise DataError(f"{len(missing)} {what} response(s) lack a gold label, e.g. {missing[0]}")
    return dataset


def _grid(config):
    if config.grid == "default":
        return default_grid(config.seed)
    if config.grid == "none":
        return None
    path = Path(config.grid)
    if not path.is_file():
        raise FileNotFoundError(f"grid file not found: {path}")
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
        return [Hyperparams.from_dict({"seed": config.seed, **e}) for e in entries]
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataError(f"grid file {path} is invalid: {exc}") from None


def schema_for_model(model):
    v = model.vocabulary
    schema = FeatureSchema(Vocabulary(tuple(v["tokens"]), v["min_count"], v["max_size"]))
    if schema.fingerprint != model.schema_fingerprint:
        raise SchemaMismatchError(
            "the model's stored vocabulary does not reproduce its schema fingerprint; "
            "the model file was built with a different feature layout"
        )
    return schema


def _frequency_table(dialogues):
    user = Counter(u.user_da for d in dialogues for u in d.utterances if u.is_user and u.user_da)
    bot = Counter(u.chatbot_da for d in dialogues for u in d.utterances if u.is_chatbot and u.chatbot_da)
    width = max(len(da.value) for da in list(UserDA) + list(ChatbotDA)) + 2
    lines = ["DA".ljust(width) + "count"]
    lines += [da.value.ljust(width) + str(user[da]) for da in UserDA if user[da]]
    lines += [da.value.ljust(width) + str(bot[da]) for da in ChatbotDA if bot[da]]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(n_dialogues, seed, mismatch_rate, out_path):
    dialogues = generate_corpus(GenSpec(n_dialogues, seed, mismatch_rate))
    write_transcripts(dialogues, out_path)
    responses = sum(len(d.chatbot_turns()) for d in dialogues)
    flagged = sum(
        u.gold_label is Appropriateness.INAPPROPRIATE for d in dialogues for u in d.utterances if u.is_chatbot
    )
    print(f"wrote {len(dialogues)} dialogues ({responses} responses, {flagged} inappropriate) to {out_path}")
    return dialogues


def cmd_annotate(config, keep_existing=False):
    """Write transcripts with user and chatbot DAs filled; returns (dialogues, agreement or None)."""
    config.require("in_path", "out_path")
    dialogues = _load(config)
    ruleset, lexicons, tagger = _resources(config)
    annotated = annotate_all(
        dialogues, ruleset, tagger, lexicons, overwrite_user=not keep_existing, threads=config.threads
    )
    write_transcripts(annotated, config.out_path)
    print(_frequency_table(annotated))

    pairs = [
        (g.user_da, a.user_da)
        for d, ad in zip(dialogues, annotated)
        for g, a in zip(d.utterances, ad.utterances)
        if g.is_user and g.user_da is not None
    ]
    agreement = None
    if pairs:
        agreement = sum(g == a for g, a in pairs) / len(pairs)
        print(f"agreement with input user DAs: {agreement:.4f} ({len(pairs)} user turns)")
    print(f"wrote {len(annotated)} annotated dialogues to {config.out_path}")
    return annotated, agreement


@dataclass
class TrainResult:
    model: object
    best: Hyperparams
    grid_report: list
    train: list
    dev: list
    test: list
    model_bytes: int


def cmd_train(config):
    config.require("in_path", "model_path")
    dialogues = _fill_missing(_load(config), config)
    train, dev, test = split_dialogues(dialogues, config.seed, config.train_fraction, config.dev_fraction)
    schema = FeatureSchema(build_vocabulary(train))
    train_set = _labelled(featurize(train, schema), "training")
    dev_set = _labelled(featurize(dev, schema), "development")
    print(f"split: {len(train)} train / {len(dev)} dev / {len(test)} test dialogues; "
          f"{schema.dimension} features ({len(schema.vocabulary)} vocabulary tokens)")

    grid = _grid(config)
    if grid is None:
        best, report = Hyperparams(seed=config.seed), []
        print("grid search skipped; using default hyperparameters")
    else:
        best, report = grid_search(train_set, dev_set, grid, threads=config.threads)
        chosen = next(r for r in report if r["hyperparams"] == best.to_dict())
        print(f"grid search over {len(grid)} configurations")
        print(f"dev scores: weighted F1 {chosen['weighted_f1']:.4f}, accuracy {chosen['accuracy']:.4f}")
    print("chosen hyperparameters: " + ", ".join(f"{k}={v}" for k, v in best.to_dict().items()))

    full = featurize(train + dev, schema)
    vocab = schema.vocabulary
    model = train_forest(
        full.X, full.y, best,
        vocabulary={"tokens": list(vocab.tokens), "min_count": vocab.min_count, "max_size": vocab.max_size},
        schema_fingerprint=schema.fingerprint,
        threads=config.threads,
    )
    size = save_model(model, config.model_path)
    print(
        f"storage: {len(model.trees)} trees, {model.n_nodes} nodes, {model.n_parameters} parameters, "
        f"max depth {model.max_depth()}, {size} bytes ({size / 2**20:.2f} MiB) in {config.model_path}"
    )
    if config.out_path is not None:
        write_transcripts(test, config.out_path)
        print(f"wrote {len(test)} held-out test dialogues to {config.out_path}")
    return TrainResult(model, best, report, train, dev, test, size)


def _model_and_data(config):
    model = load_model(config.model_path)
    schema = schema_for_model(model)
    dialogues = _fill_missing(_load(config), config)
    return model, schema, dialogues


def cmd_evaluate(config):
    config.require("in_path", "model_path")
    model, schema, dialogues = _model_and_data(config)
    dataset = _labelled(featurize(dialogues, schema), "test")
    predicted = model.predict_dataset(dataset)
    report = evaluate([CLASS_ORDER[i] for i in dataset.y], [CLASS_ORDER[i] for i in predicted])
    print(report.render())
    if config.out_path is not None:
        Path(config.out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def cmd_detect_explain(config):
    config.require("in_path", "model_path")
    model, schema, dialogues = _model_and_data(config)
    ruleset, _, _ = _resources(config)
    columns = schema.column_names()
    by_id = {d.id: d for d in dialogues}
    predictions, explanations = {}, []
    for vector in extract_all(dialogues, schema):
        label, votes = predict(model, vector)
        predictions[vector.provenance] = label
        if label is Appropriateness.INAPPROPRIATE:
            dialogue_id, turn = vector.provenance
            paths = decision_paths(model, vector, columns)
            explanations.append(
                explain_response(by_id[dialogue_id], turn, (label, votes), ruleset.compatibility, paths=paths)
            )
    document = build_report(dialogues, predictions, explanations, config.format)
    if config.out_path is not None:
        Path(config.out_path).write_text(document, encoding="utf-8")
    else:
        sys.stdout.write(document)
    print(f"flagged {len(explanations)} of {len(predictions)} responses")
    return document, explanations, predictions


def _gold_labels(path, strict):
    labels = {}
    for d in load_transcripts(path, strict=strict):
        for u in d.utterances:
            if u.is_chatbot and u.gold_label is not None:
                labels[(d.id, u.turn_index)] = u.gold_label
    return labels


def cmd_kappa(path_a, path_b, strict=True):
    a, b = _gold_labels(path_a, strict), _gold_labels(path_b, strict)
    only_a, only_b = sorted(a.keys() - b.keys()), sorted(b.keys() - a.keys())
    if only_a or only_b:
        shown = [f"{k[0]}#{k[1]} missing from {path_b}" for k in only_a[:5]]
        shown += [f"{k[0]}#{k[1]} missing from {path_a}" for k in only_b[:5]]
        raise DataError(
            f"label keys differ ({len(only_a)} only in first file, {len(only_b)} only in second): "
            + "; ".join(shown)
        )
    if not a:
        raise DataError("no gold labels to compare")
    keys = sorted(a)
    first, second = [a[k] for k in keys], [b[k] for k in keys]
    kappa = cohen_kappa(first, second)
    print(f"cohen's kappa: {kappa:.4f} over {len(keys)} responses")
    print(ConfusionMatrix.from_labels(first, second).render().replace("gold \\ predicted", "first \\ second"))
    return kappa


def cmd_pipeline(config, n_dialogues=800, mismatch_rate=0.15):
    """generate -> annotate -> train -> evaluate -> detect, with files under ``out_path``."""
    config.require("out_path")
    out = Path(config.out_path)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    corpus = out / "corpus.jsonl"
    if config.in_path is None:
        cmd_generate(n_dialogues, config.seed, mismatch_rate, corpus)
    else:
        corpus = config.in_path
    annotated = out / "annotated.jsonl"
    cmd_annotate(replace(config, in_path=corpus, out_path=annotated))
    model_path, test_path = out / "model.json", out / "test.jsonl"
    result = cmd_train(replace(config, in_path=annotated, model_path=model_path, out_path=test_path))
    report = cmd_evaluate(replace(config, in_path=test_path, model_path=model_path, out_path=out / "eval.json"))
    suffix = "json" if config.format == "json" else "md"
    cmd_detect_explain(replace(config, in_path=test_path, model_path=model_path, out_path=out / f"report.{suffix}"))
    elapsed = time.perf_counter() - started
    print(f"pipeline finished in {elapsed:.1f} s; outputs in {out}")
    return result, report, elapsed


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, *, model=False, tagging=True):
    p.add_argument("--in", dest="in_path", type=Path, help="input transcripts (JSON lines)")
    p.add_argument("--out", dest="out_path", type=Path, help="output path")
    if model:
        p.add_argument("--model", dest="model_path", type=Path, help="model file")
    if tagging:
        p.add_argument("--ruleset", dest="ruleset_path", type=Path, help="mapping rules and compatibility matrix")
        p.add_argument("--lexicons", dest="lexicons_path", type=Path, help="directory overriding bundled lexicons")
        p.add_argument("--tagger", choices=[m.value for m in TaggerMode], default="heuristic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                   help="fail on the first malformed record (default) or skip such records")


def build_parser():
    parser = _Parser(prog="dadebug", description="Detect and explain inappropriate chatbot responses.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a seeded synthetic corpus")
    p.add_argument("--out", dest="out_path", type=Path, required=True)
    p.add_argument("--n", dest="n_dialogues", type=int, default=800)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--mismatch-rate", type=float, default=0.15)

    p = sub.add_parser("annotate", help="fill user and chatbot dialogue acts")
    _common(p)
    p.add_argument("--keep-existing", action="store_true", help="keep user DAs already in the input")

    p = sub.add_parser("train", help="grid-search and train a forest")
    _common(p, model=True)
    p.add_argument("--grid", default="default", help="'default', 'none', or a JSON file of configurations")

    p = sub.add_parser("evaluate", help="score a model on labelled transcripts")
    _common(p, model=True)

    p = sub.add_parser("detect", help="flag and explain inappropriate responses")
    _common(p, model=True)
    p.add_argument("--format", choices=["md", "json"], default="md")

    p = sub.add_parser("kappa", help="Cohen's kappa between two label files")
    p.add_argument("file_a", type=Path)
    p.add_argument("file_b", type=Path)
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("pipeline", help="generate, annotate, train, evaluate and detect in one go")
    _common(p)
    p.add_argument("--n", dest="n_dialogues", type=int, default=800)
    p.add_argument("--mismatch-rate", type=float, default=0.15)
    p.add_argument("--grid", default="default")
    p.add_argument("--format", choices=["md", "json"], default="md")
    p.set_defaults(seed=7)
    return parser


_CONFIG_FIELDS = {f for f in RunConfig.__dataclass_fields__}


def _config(args):
    return RunConfig(**{k: v for k, v in vars(args).items() if k in _CONFIG_FIELDS})


def _dispatch(args):
    if args.command == "generate":
        cmd_generate(args.n_dialogues, args.seed, args.mismatch_rate, args.out_path)
    elif args.command == "kappa":
        cmd_kappa(args.file_a, args.file_b, args.strict)
    elif args.command == "annotate":
        cmd_annotate(_config(args), keep_existing=args.keep_existing)
    elif args.command == "train":
        cmd_train(_config(args))
    elif args.command == "evaluate":
        cmd_evaluate(_config(args))
    elif args.command == "detect":
        cmd_detect_explain(_config(args))
    elif args.command == "pipeline":
        cmd_pipeline(_config(args), args.n_dialogues, args.mismatch_rate)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("generate", "pipeline"):
            GenSpec(args.n_dialogues, args.seed, args.mismatch_rate)
        if args.command not in ("generate", "kappa"):
            _config(args)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"dadebug: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _dispatch(args)
    except _UsageError as exc:
        print(f"dadebug: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"dadebug: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # noqa: BLE001 - last-resort handler for the exit-code contract
        traceback.print_exc()
        print("dadebug: internal error (please report with the traceback above)", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
