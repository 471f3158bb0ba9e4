import json

import pytest

from silverscore import data_io
from silverscore.data_io import CorpusRecord, SynthesisConfig


@pytest.fixture
def synth_file(tmp_path):
    def make(n=40, dim=16, noise=0.05, seed=0, name="syn.slve"):
        path = tmp_path / name
        records, _ = data_io.generate_synthetic(SynthesisConfig(n, dim, (2, 5), (2, 5), noise, seed))
        data_io.save_embeddings(records, path)
        return path, records
    return make


WORDS = ("regen schnee wind sonne wolken norden sueden westen osten nacht tag morgen "
         "kalt warm frost nebel gewitter schauer klar freundlich").split()


@pytest.fixture
def corpus_file(tmp_path):
    def make(ids, seed=0, name="corpus.jsonl", reordered=False):
        import random
        rng = random.Random(seed)
        recs = []
        for rid in ids:
            ref = rng.sample(WORDS, rng.randint(4, 9))
            hyp = list(ref)
            for _ in range(rng.randint(0, 2)):
                hyp[rng.randrange(len(hyp))] = rng.choice(WORDS)
            reo = " ".join(hyp[1:] + hyp[:1]) if reordered else None
            recs.append(CorpusRecord(rid, " ".join(ref), " ".join(hyp), reo))
        path = tmp_path / name
        data_io.save_corpus(recs, path)
        return path
    return make


@pytest.fixture
def run_cli(capsys):
    from silverscore.cli import main

    def run(*args):
        code = main([str(a) for a in args])
        out, err = capsys.readouterr()
        return code, out, err
    return run


def parse_json(text):
    return json.loads(text)


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
