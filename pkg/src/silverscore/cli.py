"""Command-line entry point.

Exit codes: 0 ok, 2 input error, 3 a metric is undefined for every item.
Nothing is written to stdout unless the command succeeds (exit 0 or 3).
"""

import argparse
import csv
import math
import sys
from collections import defaultdict

from . import __version__, analysis, data_io, report, stats
from .embedding import DEFAULT_WEIGHT, Direction
from .errors import DegenerateSample, ParseError, SilverScoreError
from .text_metrics import Smoothing, Tokenizer, bleu, rouge_l, tokenize

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED = 0, 2, 3


class UsageError(SilverScoreError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_format(p, default="table"):
    p.add_argument("--format", choices=report.FORMATS, default=default)


def _add_metric_inputs(p):
    p.add_argument("--corpus", help="JSONL corpus with reference/hypothesis text")
    p.add_argument("--embeddings", help="SLVE (or .jsonl) video clip / text token embeddings")
    p.add_argument("--bert-embeddings",
                   help="SLVE file: hypothesis token embeddings in the clip slot, "
                        "reference token embeddings in the token slot")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="min-max normalize pooled scores before overlap/AUC (default: on)")
    p.add_argument("--tokenizer", choices=[t.value for t in Tokenizer], default="whitespace")
    p.add_argument("--smoothing", choices=[s.value for s in Smoothing], default="epsilon")
    p.add_argument("--weight", type=float, default=DEFAULT_WEIGHT)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for SiLVERScore")
    p.add_argument("--scores-out", help="write per-item scores (TSV) for kde-export")
    _add_format(p)


def build_parser():
    parser = _Parser(prog="silverscore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="SiLVERScore for every record of an embedding file")
    p.add_argument("embeddings")
    p.add_argument("--weight", type=float, default=DEFAULT_WEIGHT)
    p.add_argument("--direction", choices=[d.value for d in Direction], default="v2t")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    _add_format(p)

    p = sub.add_parser("analyze", help="run an analysis protocol")
    asub = p.add_subparsers(dest="analysis", required=True, parser_class=_Parser)
    a = asub.add_parser("correct-vs-random")
    _add_metric_inputs(a)
    a = asub.add_parser("reorder")
    _add_metric_inputs(a)
    a.add_argument("--reordered-embeddings", help="embeddings of reordered texts (same ids)")
    a.add_argument("--reordered-bert-embeddings",
                   help="BERTScore embeddings with reordered hypothesis tokens (same ids)")
    a = asub.add_parser("prosody")
    _add_metric_inputs(a)
    a.add_argument("--prosody", required=True, help="token intensity file")
    a = asub.add_parser("retrieval")
    a.add_argument("--embeddings")
    a.add_argument("--matrix", help="similarity grid (rows = texts, columns = videos)")
    a.add_argument("--ks", default="1,5,10", help="comma-separated k values")
    a.add_argument("--direction", choices=[d.value for d in Direction], default="t2v")
    a.add_argument("--heatmap-out", help="write the similarity matrix as a grid file")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--weight", type=float, default=DEFAULT_WEIGHT)
    a.add_argument("--temperature", type=float, default=1.0)
    _add_format(a)

    p = sub.add_parser("text-metrics", help="per-sentence BLEU and ROUGE-L")
    p.add_argument("--refs", required=True, help="references, one sentence per line")
    p.add_argument("--hyps", required=True, help="hypotheses, one sentence per line")
    p.add_argument("--tokenizer", choices=[t.value for t in Tokenizer], default="whitespace")
    p.add_argument("--max-n", type=int, default=4, choices=range(1, 5), metavar="{1..4}")
    p.add_argument("--smoothing", choices=[s.value for s in Smoothing], default="epsilon")
    _add_format(p)

    p = sub.add_parser("kde-export", help="KDE curves for each (metric, condition) in a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--grid-size", type=int, default=stats.GRID_SIZE)

    p = sub.add_parser("synth", help="write a synthetic paired-embedding SLVE file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--clips", type=int, nargs=2, default=(3, 10), metavar=("MIN", "MAX"))
    p.add_argument("--tokens", type=int, nargs=2, default=(3, 10), metavar=("MIN", "MAX"))
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


# -- commands ----------------------------------------------------------------------------

def cmd_score(args):
    records = data_io.load_embeddings(args.embeddings)
    values = analysis.score_records(records, args.weight, Direction(args.direction),
                                    args.temperature, args.jobs)
    rows = [[r.id, v.z, v.scaled] for r, v in zip(records, values)]
    if not rows:
        return "", EXIT_OK
    return report.render_rows(["id", "z", "score"], rows, args.format), EXIT_OK


def _options(args):
    return analysis.Options(
        seed=args.seed,
        normalize=getattr(args, "normalize", True),
        weight=args.weight,
        temperature=args.temperature,
        tokenizer=Tokenizer(getattr(args, "tokenizer", "whitespace")),
        smoothing=Smoothing(getattr(args, "smoothing", "epsilon")),
        jobs=getattr(args, "jobs", 1),
    )


def _load_inputs(args):
    loaders = {
        "corpus": data_io.load_corpus,
        "embeddings": data_io.load_embeddings,
        "bert": data_io.load_embeddings,
        "reordered_embeddings": data_io.load_embeddings,
        "reordered_bert": data_io.load_embeddings,
    }
    flags = {"bert": "bert_embeddings", "reordered_bert": "reordered_bert_embeddings"}
    sources, digests = {}, {}
    for name, loader in loaders.items():
        path = getattr(args, flags.get(name, name), None)
        if path is None:
            continue
        sources[name] = loader(path)
        digests[name] = {"path": str(path), "sha256": analysis.file_digest(path)}
    return sources, digests


def _write_scores(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["metric", "condition", "id", "value"])
        for metric, cond, rid, v in rows:
            w.writerow([metric, cond, rid, report.fmt_delimited(v)])


def cmd_analyze(args):
    opts = _options(args)
    sources, digests = _load_inputs(args)
    if args.analysis == "retrieval":
        matrix = None
        if args.matrix:
            matrix, _, _ = data_io.load_grid(args.matrix)
            digests["matrix"] = {"path": args.matrix, "sha256": analysis.file_digest(args.matrix)}
        try:
            ks = tuple(int(k) for k in args.ks.split(","))
        except ValueError:
            raise UsageError(f"--ks must be comma-separated integers, got {args.ks!r}") from None
        inputs = analysis.Inputs.align(digests, **sources)
        rep, matrix = analysis.run_retrieval(inputs, opts, matrix, ks, Direction(args.direction))
        if args.heatmap_out:
            ids = inputs.ids if inputs.ids and len(inputs.ids) == len(matrix) else None
            data_io.save_grid(matrix, args.heatmap_out, ids, ids, corner="text/video")
        return report.render_report(rep, args.format), EXIT_OK

    inputs = analysis.Inputs.align(digests, **sources)
    if args.analysis == "correct-vs-random":
        rep, score_rows = analysis.run_correct_vs_random(inputs, opts)
    elif args.analysis == "reorder":
        rep, score_rows = analysis.run_reorder(inputs, opts)
    else:
        prosody = data_io.load_prosody(args.prosody)
        inputs.digests["prosody"] = {"path": args.prosody,
                                     "sha256": analysis.file_digest(args.prosody)}
        rep, score_rows = analysis.run_prosody(inputs, prosody, opts)
    if args.scores_out:
        _write_scores(args.scores_out, score_rows)
    text = report.render_report(rep, args.format)
    undefined = [r["metric"] for r in rep["rows"] if r.get("status") == "undefined"]
    if undefined:
        _diag(f"metric undefined for every item: {', '.join(undefined)}")
        return text, EXIT_UNDEFINED
    return text, EXIT_OK


def _read_lines(path):
    with data_io._open(path, "r", encoding="utf-8") as fh:
        return [ln.rstrip("\n").rstrip("\r") for ln in fh]


def cmd_text_metrics(args):
    refs, hyps = _read_lines(args.refs), _read_lines(args.hyps)
    if len(refs) != len(hyps):
        raise UsageError(f"{args.refs} has {len(refs)} lines but {args.hyps} has {len(hyps)}")
    header = (["line", f"bleu_{args.max_n}"] + [f"p{n}" for n in range(1, args.max_n + 1)]
              + ["brevity_penalty", "rouge_l_p", "rouge_l_r", "rouge_l_f"])
    rows = []
    for lineno, (r, h) in enumerate(zip(refs, hyps), 1):
        try:
            rt, ht = tokenize(r, args.tokenizer), tokenize(h, args.tokenizer)
        except SilverScoreError as exc:
            raise ParseError(str(exc), args.refs if not r.strip() else args.hyps, lineno) from None
        b = bleu(ht, [rt], args.max_n, args.smoothing)
        rl = rouge_l(ht, rt)
        rows.append([lineno, b.value, *b.per_order_precision, b.brevity_penalty,
                     rl.precision, rl.recall, rl.f1])
    if args.format == "table":
        rows = [[report.UNDEFINED if v is None else v for v in row] for row in rows]
    return report.render_rows(header, rows, args.format), EXIT_OK


def _read_scores(path):
    groups = defaultdict(list)
    with data_io._open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split("\t")[:4] != ["metric", "condition", "id", "value"]:
        raise ParseError("expected header 'metric\\tcondition\\tid\\tvalue'", path, 1)
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", path, lineno)
        metric, cond, _, raw = fields
        if raw == report.UNDEFINED:
            continue
        try:
            v = float(raw)
        except ValueError:
            raise ParseError(f"bad score {raw!r}", path, lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite score {raw!r}", path, lineno)
        groups[(metric, cond)].append(v)
    return groups


def cmd_kde_export(args):
    groups = _read_scores(args.scores)
    out_rows = []
    for (metric, cond), values in groups.items():
        try:
            curve = stats.gaussian_kde(values, args.bandwidth, args.grid_size)
        except DegenerateSample as exc:
            raise DegenerateSample(f"{metric}/{cond}: {exc}") from None
        for x, d in zip(curve.grid.tolist(), curve.density.tolist()):
            out_rows.append([metric, cond, curve.bandwidth, x, d])
    text = report.render_delimited(["metric", "condition", "bandwidth", "x", "density"], out_rows)
    with data_io._open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return f"wrote {len(groups)} curve(s) to {args.out}\n", EXIT_OK


def cmd_synth(args):
    config = data_io.SynthesisConfig(n=args.n, dim=args.dim, clips_range=tuple(args.clips),
                                     tokens_range=tuple(args.tokens), noise_sigma=args.noise,
                                     seed=args.seed)
    records, pairing = data_io.generate_synthetic(config)
    data_io.save_embeddings(records, args.out)
    sidecar = f"{args.out}.pairing.tsv"
    data_io.save_pairing(pairing, sidecar)
    return f"wrote {len(records)} record(s) to {args.out} and pairing to {sidecar}\n", EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "analyze": cmd_analyze,
    "text-metrics": cmd_text_metrics,
    "kde-export": cmd_kde_export,
    "synth": cmd_synth,
}


def _diag(message):
    print(f"silverscore: {message}".replace("\n", " "), file=sys.stderr)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        text, code = COMMANDS[args.command](args)
    except SilverScoreError as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT
    sys.stdout.write(text)
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
