"""Command-line entry points covering every engine capability.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. All
randomness sits behind ``--seed``. Flag values override config-file values,
which override defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .corpus import Role, corpus_stats, load_document, load_links, write_document
from .errors import (
    ConfigurationError,
    IntertextError,
    SchemaError,
    UndefinedMetricError,
    ValidationError,
)
from .evaluation import (
    SamplingStrategy,
    evaluate_folds,
    export_training_pairs,
    positive_pairs,
    report_to_json,
    report_to_text,
    sample_negatives,
)
from .matcher import FilterConfig, MatchParams, apply_filters, export_candidates, find_raw_candidates, load_stoplist
from .pipeline import (
    RunConfig,
    execute,
    make_embedding_provider,
    reference_pairs,
    run_manifest,
    write_matches,
)
from .retrieval import embed_segments, write_vectors

_ARCH_ALIASES = {
    "retrieval": "retrieval_only",
    "classification": "classification_only",
    "rerank": "retrieve_rerank",
    "retrieval_only": "retrieval_only",
    "classification_only": "classification_only",
    "retrieve_rerank": "retrieve_rerank",
    "ngram": "ngram",
}

_RUN_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)  # type: ignore[attr-defined]
_EVAL_KEYS = {"folds", "q_size", "s_size", "ks"}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _read_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file {path!r} does not exist")
    if p.suffix.lower() == ".toml":
        with p.open("rb") as f:
            return tomllib.load(f)
    return json.loads(p.read_text(encoding="utf-8"))


def _merged_run_config(args: argparse.Namespace) -> tuple[RunConfig, dict]:
    """Precedence: explicit flags > config file > RunConfig defaults."""
    file_cfg = _read_config_file(getattr(args, "config", None))
    unknown = set(file_cfg) - _RUN_CONFIG_KEYS - _EVAL_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config file key(s): {', '.join(sorted(unknown))}")
    merged = {k: v for k, v in file_cfg.items() if k in _RUN_CONFIG_KEYS}
    for key in _RUN_CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "architecture" in merged and isinstance(merged["architecture"], str):
        arch = _ARCH_ALIASES.get(merged["architecture"])
        if arch is None:
            raise ConfigurationError(f"unknown architecture {merged['architecture']!r}")
        merged["architecture"] = arch
    eval_cfg = {k: v for k, v in file_cfg.items() if k in _EVAL_KEYS}
    return RunConfig.from_dict(merged), eval_cfg


def _role(value: str) -> Role:
    try:
        return Role(value)
    except ValueError:
        raise ConfigurationError(f"role must be 'query' or 'source', got {value!r}") from None


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="TOML/JSON config file (flags override it)")
    sub.add_argument("--arch", dest="architecture", choices=sorted(set(_ARCH_ALIASES)), default=None)
    sub.add_argument("--k", type=int, default=None, help="retrieval depth")
    sub.add_argument("--threshold", type=float, default=None, help="classification threshold")
    sub.add_argument("--embedder", default=None, help="mock[:dim=..,seed=..] | file:PATH | http(s)://URL")
    sub.add_argument("--classifier", default=None, help="jaccard[:max_tokens=..] | http(s)://URL")
    sub.add_argument("--budget", type=int, default=None, help="pair-input token budget")
    sub.add_argument("--min-shared", dest="min_shared", type=int, default=None)
    sub.add_argument("--window", type=int, default=None)
    sub.add_argument("--match-on", dest="match_on", choices=["surface", "lemma"], default=None)
    sub.add_argument("--max-doc-freq", dest="max_doc_freq", type=float, default=None)
    sub.add_argument("--stoplist", dest="stoplist_path", default=None)
    sub.add_argument("--pos-allow", dest="pos_allow", default=None, help="comma-separated POS tags")
    sub.add_argument("--jobs", type=int, default=None, help="worker cap for per-query parallelism")
    sub.add_argument("--seed", type=int, default=None)


def _fix_pos_allow(args) -> None:
    if getattr(args, "pos_allow", None) is not None:
        args.pos_allow = tuple(t.strip() for t in args.pos_allow.split(",") if t.strip())


# ---------------- subcommands ----------------


def _cmd_ingest(args) -> int:
    doc = load_document(args.infile, args.format, role=_role(args.role), author=args.author)
    print(f"loaded {len(doc.segments)} segments from {args.infile}")
    if args.out:
        write_document(doc, args.out, args.out_format)
        print(f"wrote normalized copy to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    doc = load_document(args.infile, args.format, role=_role(args.role), author=args.author)
    stats = corpus_stats(doc)
    author = doc.author or doc.doc_id
    header = ["Author", "Segments", "Avg. Tokens", "Min", "Max", "Std. Dev."]
    row = [
        author,
        f"{stats.segment_count:,}",
        f"{stats.avg_tokens:.2f}",
        str(stats.min_tokens),
        str(stats.max_tokens),
        f"{stats.stddev_tokens:.2f}",
    ]
    widths = [max(len(h), len(v)) for h, v in zip(header, row)]
    print("  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths))))
    print("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths))))
    return 0


def _cmd_match(args) -> int:
    query = load_document(args.query, role=Role.QUERY)
    source = load_document(args.source, role=Role.SOURCE)
    params = MatchParams(
        min_shared=args.min_shared if args.min_shared is not None else 2,
        window=args.window if args.window is not None else 10,
        match_on=args.match_on or "surface",
    )
    if args.no_stoplist:
        stoplist: Optional[frozenset[str]] = frozenset()
    elif args.stoplist_path:
        stoplist = load_stoplist(args.stoplist_path)
    else:
        stoplist = None  # default: top-100 of the source corpus
    _fix_pos_allow(args)
    filters = FilterConfig(
        stoplist=stoplist,
        pos_allow=frozenset(args.pos_allow) if args.pos_allow else None,
        max_doc_freq=args.max_doc_freq if args.max_doc_freq is not None else 0.01,
    )
    candidates = apply_filters(find_raw_candidates(query, source, params), filters, source, query)
    export_candidates(candidates, args.out)
    print(f"wrote {len(candidates)} candidates to {args.out}")
    return 0


def _cmd_index(args) -> int:
    doc = load_document(args.infile, role=_role(args.role))
    provider = make_embedding_provider(args.embedder or "mock", seed=args.seed or 0)
    vectors = embed_segments(provider, doc.segments, role=args.embed_role)
    write_vectors([seg.id for seg in doc.segments], vectors, args.out)
    print(f"wrote {len(doc.segments)} vectors (dim {provider.dim}) to {args.out}")
    return 0


def _cmd_detect(args) -> int:
    _fix_pos_allow(args)
    config, _ = _merged_run_config(args)
    query = load_document(args.query, role=Role.QUERY)
    source = load_document(args.source, role=Role.SOURCE)
    matches = execute(config, query, source)
    write_matches(matches, args.out, args.format)
    if args.manifest:
        manifest = run_manifest(config, query, source, config.embedder, config.classifier)
        Path(args.manifest).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(matches)} matches ({len(reference_pairs(matches))} references) to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    _fix_pos_allow(args)
    config, eval_cfg = _merged_run_config(args)
    query_corpus = load_document(args.query_corpus, role=Role.QUERY)
    source_corpus = load_document(args.source_corpus, role=Role.SOURCE)
    links = load_links(args.links, query_corpus, source_corpus)
    ks_raw = args.ks if args.ks is not None else eval_cfg.get("ks", "1,5,10,20,100")
    if isinstance(ks_raw, str):
        ks = tuple(int(x) for x in ks_raw.split(",") if x.strip())
    else:
        ks = tuple(int(x) for x in ks_raw)
    report = evaluate_folds(
        query_corpus,
        source_corpus,
        links,
        config,
        folds=args.folds if args.folds is not None else int(eval_cfg.get("folds", 5)),
        seed=config.seed,
        q_size=args.q_size if args.q_size is not None else int(eval_cfg.get("q_size", 937)),
        s_size=args.s_size if args.s_size is not None else int(eval_cfg.get("s_size", 880)),
        ks=ks,
    )
    rendered = report_to_json(report) if args.format == "json" else report_to_text(report)
    if args.report:
        Path(args.report).write_text(rendered, encoding="utf-8")
        print(f"wrote report to {args.report}")
    else:
        print(rendered, end="")
    return 0


def _strategy(value: str) -> SamplingStrategy:
    try:
        return SamplingStrategy(value)
    except ValueError:
        raise ConfigurationError(f"unknown sampling strategy {value!r}") from None


def _load_pair_setup(args):
    query = load_document(args.query, role=Role.QUERY)
    source = load_document(args.source, role=Role.SOURCE)
    links = load_links(args.links, query, source)
    provider = (
        make_embedding_provider(args.embedder, seed=args.seed or 0) if args.embedder else None
    )
    return query, source, links, provider


def _cmd_sample_negatives(args) -> int:
    query, source, links, provider = _load_pair_setup(args)
    negatives = sample_negatives(
        _strategy(args.strategy),
        args.ratio,
        links,
        query,
        source,
        embed_provider=provider,
        seed=args.seed or 0,
    )
    count = export_training_pairs(negatives, args.out, args.format)
    print(f"wrote {count} negatives to {args.out}")
    return 0


def _cmd_export_pairs(args) -> int:
    query, source, links, provider = _load_pair_setup(args)
    pairs = positive_pairs(links, query, source)
    if args.ratio > 0:
        pairs = pairs + sample_negatives(
            _strategy(args.strategy),
            args.ratio,
            links,
            query,
            source,
            embed_provider=provider,
            seed=args.seed or 0,
        )
    count = export_training_pairs(pairs, args.out, args.format)
    print(f"wrote {count} training pairs to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.db, inline_runs=args.inline)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="intertext", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load, validate, and optionally re-emit a document")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p.add_argument("--role", default="query")
    p.add_argument("--author", default="")
    p.add_argument("--out", default=None)
    p.add_argument("--out-format", dest="out_format", choices=["csv", "jsonl"], default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="token statistics for a document")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p.add_argument("--role", default="query")
    p.add_argument("--author", default="")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("match", help="rule-based n-gram candidates with the filter cascade")
    p.add_argument("--query", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--min-shared", dest="min_shared", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--match-on", dest="match_on", choices=["surface", "lemma"], default=None)
    p.add_argument("--stoplist", dest="stoplist_path", default=None)
    p.add_argument("--no-stoplist", dest="no_stoplist", action="store_true")
    p.add_argument("--max-doc-freq", dest="max_doc_freq", type=float, default=None)
    p.add_argument("--pos-allow", dest="pos_allow", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("index", help="embed a document and export vectors keyed by segment id")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--role", default="source")
    p.add_argument("--embed-role", dest="embed_role", choices=["query", "candidate"], default="candidate")
    p.add_argument("--embedder", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("detect", help="run a detection architecture over a document pair")
    p.add_argument("--query", required=True)
    p.add_argument("--source", required=True)
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("evaluate", help="cross-validated benchmark with metrics report")
    p.add_argument("--query-corpus", dest="query_corpus", required=True)
    p.add_argument("--source-corpus", dest="source_corpus", required=True)
    p.add_argument("--links", required=True)
    _add_run_flags(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--q-size", dest="q_size", type=int, default=None)
    p.add_argument("--s-size", dest="s_size", type=int, default=None)
    p.add_argument("--ks", default=None, help="comma-separated IR cutoffs")
    p.add_argument("--report", default=None, help="write report to this path")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.set_defaults(func=_cmd_evaluate)

    for name, func, help_text in (
        ("sample-negatives", _cmd_sample_negatives, "sample contrastive negatives for training"),
        ("export-pairs", _cmd_export_pairs, "export positives plus sampled negatives"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--query", required=True)
        p.add_argument("--source", required=True)
        p.add_argument("--links", required=True)
        p.add_argument("--strategy", default="random_negative")
        p.add_argument("--ratio", type=int, default=1)
        p.add_argument("--embedder", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        p.set_defaults(func=func)

    p = sub.add_parser("serve", help="start the HTTP review service")
    p.add_argument("--db", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--inline", action="store_true", help="execute runs inside the request")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SchemaError, ValidationError, ConfigurationError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IntertextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:  # console_scripts hook
    sys.exit(main())
