"""Drivers that run each protocol over loaded inputs and return plain-dict reports.

The dicts are what the CLI serializes, so every value is a JSON scalar, list
or dict, and all ordering is fixed by the inputs.
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import __version__, experiments, stats
from .embedding import DEFAULT_WEIGHT, Direction, silver_score
from .errors import DegenerateRange, DegenerateSample, IdMismatch, SilverScoreError, TooShort
from .text_metrics import Smoothing, Tokenizer, bleu, greedy_match, rouge_l, tokenize

BLEU_ORDERS = (1, 2, 3, 4)
SILVER = "SiLVERScore"
BERT = "BERTScore"
ROUGE = "ROUGE-L"


@dataclass
class Inputs:
    """Everything an analysis may consume, aligned to one id order."""
    ids: list
    corpus: Optional[list] = None
    embeddings: Optional[list] = None
    bert: Optional[list] = None
    reordered_embeddings: Optional[list] = None
    reordered_bert: Optional[list] = None
    digests: dict = field(default_factory=dict)

    @classmethod
    def align(cls, digests=None, **sources):
        """Reorder every record list to the id order of the first one given."""
        present = {k: v for k, v in sources.items() if v is not None}
        ids = []
        for name in ("corpus", "embeddings", "bert", "reordered_embeddings", "reordered_bert"):
            if name in present:
                ids = [r.id for r in present[name]]
                break
        aligned = {}
        for name, recs in present.items():
            by_id = {r.id: r for r in recs}
            if set(by_id) != set(ids):
                extra = sorted(set(by_id) ^ set(ids))
                raise IdMismatch(f"{name} ids do not match the other inputs (e.g. {extra[0]!r})")
            aligned[name] = [by_id[i] for i in ids]
        return cls(ids=ids, digests=dict(digests or {}), **aligned)


@dataclass(frozen=True)
class Options:
    seed: int = 0
    normalize: bool = True
    weight: float = DEFAULT_WEIGHT
    temperature: float = 1.0
    tokenizer: Tokenizer = Tokenizer.WHITESPACE
    smoothing: Smoothing = Smoothing.EPSILON
    jobs: int = 1

    def echo(self):
        return {
            "seed": self.seed,
            "normalize": self.normalize,
            "weight": self.weight,
            "temperature": self.temperature,
            "tokenizer": Tokenizer(self.tokenizer).value,
            "smoothing": Smoothing(self.smoothing).value,
            "silverscore_value": "unclamped",
        }


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _silver_job(args):
    clips, tokens, weight, direction, temperature = args
    return silver_score(clips, tokens, weight, direction, temperature)


def map_ordered(fn, items, jobs=1):
    """``map`` over a process pool when ``jobs > 1``; results stay in input order."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def score_records(records, weight=DEFAULT_WEIGHT, direction=Direction.VIDEO_TO_TEXT,
                  temperature=1.0, jobs=1):
    return map_ordered(_silver_job, [(r.clip_embeddings, r.token_embeddings, weight,
                                      direction, temperature) for r in records], jobs)


def silver_pairs(embeddings, pairs, opts):
    """Unclamped SiLVERScore of video ``i`` against text ``j`` for each ``(i, j)``."""
    jobs = [(embeddings[i].clip_embeddings, embeddings[j].token_embeddings, opts.weight,
             Direction.VIDEO_TO_TEXT, opts.temperature) for i, j in pairs]
    return [v.unclamped for v in map_ordered(_silver_job, jobs, opts.jobs)]


def _tokenized(texts, tokenizer):
    return [tokenize(t, tokenizer) for t in texts]


def text_metric_scores(hyps, refs, opts):
    """Per-item text metric scores (``None`` = undefined), keyed by metric name."""
    out = {f"BLEU-{n}": [] for n in BLEU_ORDERS}
    out[ROUGE] = []
    for h, r in zip(hyps, refs):
        for n in BLEU_ORDERS:
            out[f"BLEU-{n}"].append(bleu(h, [r], n, opts.smoothing).value)
        out[ROUGE].append(rouge_l(h, r).f1)
    return out


def _header(analysis, inputs, opts, extra=None):
    rep = {
        "tool": "silverscore",
        "version": __version__,
        "analysis": analysis,
        "inputs": dict(sorted(inputs.digests.items())),
        "config": opts.echo(),
    }
    if extra:
        rep["config"].update(extra)
    return rep


def _separability_row(metric, pos_scores, neg_scores, pos_label, neg_label, normalize, fn):
    pos, neg = experiments.drop_undefined_pairs(metric, pos_scores, neg_scores,
                                                pos_label, neg_label)
    row = {"metric": metric, "n_items": len(pos_scores), "dropped": pos.undefined_count}
    if len(pos) == 0:
        row.update(status="undefined", overlap_percent=None, roc_auc=None,
                   note="metric is undefined for every item")
        return row, pos, neg
    try:
        res = fn(pos, neg, normalize=normalize)
    except (DegenerateSample, DegenerateRange) as exc:
        row.update(status="degenerate", overlap_percent=None, roc_auc=None, note=str(exc))
        return row, pos, neg
    row.update(status="ok", overlap_percent=res.overlap_percent, roc_auc=res.roc_auc)
    return row, pos, neg


def _score_rows(metric, label, ids, scores):
    return [(metric, label, i, s) for i, s in zip(ids, scores)]


def _require_some(inputs, *names):
    if not any(getattr(inputs, n) is not None for n in names):
        raise SilverScoreError("no metric inputs given (need a corpus, embeddings or "
                               "BERTScore token embeddings)")


def run_correct_vs_random(inputs, opts):
    """Score each item with its own reference and with a deranged one.

    Returns ``(report, score_rows)``.
    """
    _require_some(inputs, "corpus", "embeddings", "bert")
    plan = experiments.derangement(len(inputs.ids), opts.seed)
    correct_pairs = [(i, i) for i in range(plan.n)]
    random_pairs = list(enumerate(plan.mapping))

    per_metric = {}  # metric -> (correct, random)
    if inputs.corpus is not None:
        hyps = _tokenized([c.hypothesis for c in inputs.corpus], opts.tokenizer)
        refs = _tokenized([c.reference for c in inputs.corpus], opts.tokenizer)
        good = text_metric_scores(hyps, refs, opts)
        bad = text_metric_scores(hyps, [refs[j] for j in plan.mapping], opts)
        for m in good:
            per_metric[m] = (good[m], bad[m])
    if inputs.bert is not None:
        b = inputs.bert
        per_metric[BERT] = tuple(
            [greedy_match(b[i].clip_embeddings, b[j].token_embeddings).f1 for i, j in pairs]
            for pairs in (correct_pairs, random_pairs))
    if inputs.embeddings is not None:
        per_metric[SILVER] = (silver_pairs(inputs.embeddings, correct_pairs, opts),
                              silver_pairs(inputs.embeddings, random_pairs, opts))

    rows, score_rows = [], []
    for metric, (good, bad) in per_metric.items():
        row, _, _ = _separability_row(metric, good, bad, "correct", "random", opts.normalize,
                                      experiments.discrimination_analysis)
        rows.append(row)
        score_rows += _score_rows(metric, "correct", inputs.ids, good)
        score_rows += _score_rows(metric, "random", inputs.ids, bad)
    report = _header("correct-vs-random", inputs, opts)
    report["n_items"] = plan.n
    report["rows"] = rows
    return report, score_rows


def run_reorder(inputs, opts):
    """Original hypotheses vs. reordered ones; reorderings come from the corpus
    or reordered-embedding files when present, otherwise from a seeded shuffle."""
    _require_some(inputs, "corpus", "embeddings", "bert")
    n = len(inputs.ids)
    per_metric, sources = {}, {}
    if inputs.corpus is not None:
        hyps = _tokenized([c.hypothesis for c in inputs.corpus], opts.tokenizer)
        refs = _tokenized([c.reference for c in inputs.corpus], opts.tokenizer)
        reordered, ingested, shuffled, skipped = [], 0, 0, 0
        for i, (c, h) in enumerate(zip(inputs.corpus, hyps)):
            if c.reordered_hypothesis is not None:
                reordered.append(tokenize(c.reordered_hypothesis, opts.tokenizer))
                ingested += 1
                continue
            try:
                reordered.append(experiments.shuffle_reorder(h, [opts.seed, i]))
                shuffled += 1
            except TooShort:
                reordered.append(None)
                skipped += 1
        keep = [i for i in range(n) if reordered[i] is not None]
        orig = text_metric_scores([hyps[i] for i in keep], [refs[i] for i in keep], opts)
        reo = text_metric_scores([reordered[i] for i in keep], [refs[i] for i in keep], opts)
        for m in orig:
            o, r = [None] * n, [None] * n
            for pos, i in enumerate(keep):
                o[i], r[i] = orig[m][pos], reo[m][pos]
            per_metric[m] = (o, r)
        sources["text"] = {"ingested": ingested, "shuffled": shuffled, "too_short": skipped}

    if inputs.bert is not None:
        b = inputs.bert
        if inputs.reordered_bert is not None:
            reo_h = [r.clip_embeddings for r in inputs.reordered_bert]
            sources[BERT] = "ingested"
        else:
            reo_h = [experiments.permute_rows(r.clip_embeddings, [opts.seed, i])
                     for i, r in enumerate(b)]
            sources[BERT] = "row-permutation"
        per_metric[BERT] = (
            [greedy_match(r.clip_embeddings, r.token_embeddings).f1 for r in b],
            [greedy_match(h, r.token_embeddings).f1 for h, r in zip(reo_h, b)])

    if inputs.embeddings is not None:
        e = inputs.embeddings
        if inputs.reordered_embeddings is not None:
            reo_t = [r.token_embeddings for r in inputs.reordered_embeddings]
            sources[SILVER] = "ingested"
        else:
            reo_t = [experiments.permute_rows(r.token_embeddings, [opts.seed, i])
                     for i, r in enumerate(e)]
            sources[SILVER] = "row-permutation"
        orig = silver_pairs(e, [(i, i) for i in range(n)], opts)
        jobs = [(r.clip_embeddings, t, opts.weight, Direction.VIDEO_TO_TEXT, opts.temperature)
                for r, t in zip(e, reo_t)]
        per_metric[SILVER] = (orig, [v.unclamped for v in map_ordered(_silver_job, jobs, opts.jobs)])

    rows, score_rows = [], []
    for metric, (o, r) in per_metric.items():
        row, _, _ = _separability_row(metric, o, r, "original", "reordered", opts.normalize,
                                      experiments.reorder_analysis)
        rows.append(row)
        score_rows += _score_rows(metric, "original", inputs.ids, o)
        score_rows += _score_rows(metric, "reordered", inputs.ids, r)
    report = _header("reorder", inputs, opts)
    report["n_items"] = n
    report["reorder_sources"] = sources
    report["rows"] = rows
    return report, score_rows


def _box_dict(box):
    if box is None:
        return None
    return {"median": box.median, "q1": box.q1, "q3": box.q3, "iqr": box.iqr,
            "whisker_lo": box.whisker_lo, "whisker_hi": box.whisker_hi,
            "outliers": list(box.outliers)}


def _categories_dict(cats):
    return [{"category": c.value, "count": cats.counts[c], "percent": cats.percentages[c]}
            for c in experiments.CATEGORY_ORDER]


def run_prosody(inputs, prosody, opts):
    """Prosody stratification of correct-pair scores.

    ``prosody`` maps sentence id to token intensities. With no metric inputs
    the report carries only the category breakdown of the annotations.
    """
    annotations = {sid: experiments.annotate_prosody(sid, levels)
                   for sid, levels in prosody.items()}
    report = _header("prosody", inputs, opts)
    if inputs.corpus is None and inputs.embeddings is None and inputs.bert is None:
        cats = experiments.category_counts(annotations.values())
        report.update(n_items=cats.total, categories=_categories_dict(cats), rows=[])
        return report, []

    per_metric = {}
    ids = inputs.ids
    if inputs.corpus is not None:
        hyps = _tokenized([c.hypothesis for c in inputs.corpus], opts.tokenizer)
        refs = _tokenized([c.reference for c in inputs.corpus], opts.tokenizer)
        per_metric.update(text_metric_scores(hyps, refs, opts))
    if inputs.bert is not None:
        per_metric[BERT] = [greedy_match(r.clip_embeddings, r.token_embeddings).f1
                            for r in inputs.bert]
    if inputs.embeddings is not None:
        per_metric[SILVER] = silver_pairs(inputs.embeddings,
                                          [(i, i) for i in range(len(ids))], opts)

    rows, score_rows, cats = [], [], None
    for metric, scores in per_metric.items():
        rep = experiments.prosody_analysis(dict(zip(ids, scores)), annotations)
        cats = cats or experiments.category_counts(annotations[i] for i in ids)
        r, p = rep.correlation if rep.correlation is not None else (None, None)
        rows.append({
            "metric": metric,
            "status": "undefined" if rep.n == 0 else "ok",
            "n": rep.n,
            "dropped": rep.undefined_count,
            "pearson_r": r,
            "p_value": p,
            "box": {c.value: _box_dict(rep.box[c]) for c in experiments.CATEGORY_ORDER},
        })
        score_rows += _score_rows(metric, "correct", ids, scores)
    report.update(n_items=len(ids), categories=_categories_dict(cats), rows=rows)
    return report, score_rows


def run_retrieval(inputs, opts, matrix=None, ks=(1, 5, 10),
                  direction=Direction.TEXT_TO_VIDEO):
    """Recall@k over a square similarity matrix (rows = texts, columns = videos).

    The matrix is computed from ``inputs.embeddings`` unless given.
    """
    if matrix is None:
        if inputs.embeddings is None:
            raise SilverScoreError("retrieval needs embeddings or a similarity matrix")
        matrix = experiments.retrieval_matrix(inputs.embeddings, opts.weight, opts.temperature)
    table = experiments.recall_at_k(matrix, ks, direction)
    report = _header("retrieval", inputs, opts, {"direction": table.direction.value})
    report["n_items"] = table.n
    report["rows"] = [{"k": k, "recall": r} for k, r in zip(table.ks, table.recalls)]
    return report, matrix
