import json
import logging

import pytest

from relforge.dataio import (
    IdentityProvider,
    LookupProvider,
    Prediction,
    Record,
    make_provider,
    read_predictions,
    read_records,
    split_validation,
    translate,
    write_predictions,
    write_records,
)
from relforge.errors import (
    ConfigError,
    DataError,
    DuplicateIdError,
    InvalidLabelError,
    MissingFieldError,
    ProviderContractError,
)

QC_LINE = {
    "id": "1",
    "language": "ko",
    "origin_query": "무선 이어폰",
    "cate_path": "Electronics,Audio,Headphones",
    "label": 1,
}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


class TestReadRecords:
    def test_valid_qc_line(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE])
        report = read_records(str(path), task="QC")
        assert len(report.records) == 1
        r = report.records[0]
        assert r.language == "ko" and r.label == 1
        assert r.cate_path == "Electronics,Audio,Headphones"

    def test_qc_line_as_qi_fails(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE])
        with pytest.raises(MissingFieldError):
            read_records(str(path), task="QI")

    def test_invalid_label(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [{**QC_LINE, "label": 2}])
        with pytest.raises(InvalidLabelError):
            read_records(str(path), task="QC")

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE, QC_LINE])
        with pytest.raises(DuplicateIdError):
            read_records(str(path), task="QC")

    def test_lenient_skips_and_counts(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE, {**QC_LINE, "id": "2", "label": 5}, {**QC_LINE, "id": "3"}])
        report = read_records(str(path), task="QC", strict=False)
        assert len(report.records) == 2
        assert len(report.skipped) == 1
        assert report.skipped[0][0] == 2  # line number

    def test_error_carries_line_number(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE, {**QC_LINE, "id": "2", "label": 7}])
        with pytest.raises(InvalidLabelError, match=":2"):
            read_records(str(path), task="QC")

    def test_unlabeled_ok(self, tmp_path):
        path = tmp_path / "r.jsonl"
        row = dict(QC_LINE)
        del row["label"]
        write_jsonl(path, [row])
        assert read_records(str(path), task="QC").records[0].label is None

    def test_bad_json_line(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"id": "1", oops\n', encoding="utf-8")
        with pytest.raises(DataError, match=":1"):
            read_records(str(path), task="QC")

    def test_unknown_task(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [QC_LINE])
        with pytest.raises(ConfigError):
            read_records(str(path), task="QX")

    def test_tsv(self, tmp_path):
        path = tmp_path / "r.tsv"
        path.write_text(
            "id\tlanguage\torigin_query\titem_title\tlabel\n"
            "1\ten\twireless earbuds\twireless earbuds case\t1\n"
            "2\tja\tワイヤレス\tearbuds\t0\n",
            encoding="utf-8",
        )
        report = read_records(str(path), task="QI", fmt="tsv")
        assert [r.label for r in report.records] == [1, 0]

    def test_string_labels_in_jsonl(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_jsonl(path, [{**QC_LINE, "label": "1"}])
        assert read_records(str(path), task="QC").records[0].label == 1


def test_write_read_identity(tmp_path):
    records = [
        Record(id="1", task="QC", language="ko", origin_query="무선", cate_path="A,B", label=1),
        Record(id="2", task="QC", language="en", origin_query="query", query_en="query", cate_path="A", label=0),
        Record(id="3", task="QC", language="ja", origin_query="ワ", cate_path="C,D"),
    ]
    path = tmp_path / "out.jsonl"
    write_records(records, str(path))
    back = read_records(str(path), task="QC").records
    assert back == records


class TestSplitValidation:
    def _records(self, lang, n, start):
        return [
            Record(id=str(start + i), task="QI", language=lang, origin_query=f"q{i}", item_title="t", label=i % 2)
            for i in range(n)
        ]

    def test_per_language_floor(self):
        records = self._records("en", 50, 0) + self._records("ko", 50, 100)
        train, val = split_validation(records, ratio=0.9, seed=1)
        for lang in ("en", "ko"):
            assert sum(1 for r in train if r.language == lang) == 45
            assert sum(1 for r in val if r.language == lang) == 5

    def test_tiny_language_goes_to_train(self, caplog):
        records = self._records("en", 10, 0) + self._records("zz", 1, 100)
        with caplog.at_level(logging.WARNING):
            train, val = split_validation(records, ratio=0.9, seed=1)
        assert sum(1 for r in train if r.language == "zz") == 1
        assert any("zz" in rec.message for rec in caplog.records)

    def test_deterministic(self):
        records = self._records("en", 40, 0) + self._records("fr", 30, 100)
        a = split_validation(records, seed=7)
        b = split_validation(records, seed=7)
        assert a == b

    def test_partition(self):
        records = self._records("en", 33, 0) + self._records("fr", 21, 100)
        train, val = split_validation(records, ratio=0.8, seed=3)
        ids = sorted(r.id for r in train) + sorted(r.id for r in val)
        assert sorted(ids) == sorted(r.id for r in records)
        assert not (set(r.id for r in train) & set(r.id for r in val))

    def test_ratio_validated(self):
        with pytest.raises(ConfigError):
            split_validation([], ratio=1.0)


class _FlakyProvider:
    def __init__(self, fail_times):
        self.fail_times = fail_times
        self.calls = 0

    def translate_batch(self, texts):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise RuntimeError("boom")
        return [t.upper() for t in texts]


class _WrongLengthProvider:
    def translate_batch(self, texts):
        return texts[:-1]


class TestTranslate:
    def _records(self):
        return [
            Record(id="1", task="QI", language="ko", origin_query="무선 이어폰", item_title="earbuds"),
            Record(id="2", task="QI", language="en", origin_query="case", item_title="case", query_en="case"),
        ]

    def test_identity(self):
        out, failed = translate(self._records(), IdentityProvider())
        assert failed == 0
        assert out[0].query_en == out[0].origin_query
        assert out[0].title_en == "earbuds"

    def test_lookup(self):
        provider = LookupProvider({"무선 이어폰": "wireless earbuds"})
        out, _ = translate(self._records(), provider)
        assert out[0].query_en == "wireless earbuds"

    def test_existing_translation_untouched(self):
        out, _ = translate(self._records(), LookupProvider({"case": "WRONG"}))
        assert out[1].query_en == "case"

    def test_source_fields_never_mutated(self):
        records = self._records()
        out, _ = translate(records, IdentityProvider())
        for before, after in zip(records, out):
            assert after.origin_query == before.origin_query
            assert after.item_title == before.item_title
            assert after.label == before.label

    def test_wrong_batch_length(self):
        with pytest.raises(ProviderContractError):
            translate(self._records(), _WrongLengthProvider())

    def test_retry_once_then_succeed(self):
        provider = _FlakyProvider(fail_times=1)
        out, failed = translate(self._records(), provider)
        assert failed == 0
        assert out[0].query_en == out[0].origin_query.upper()

    def test_two_failures_marks_untranslated(self):
        provider = _FlakyProvider(fail_times=2)
        out, failed = translate(self._records(), provider, batch_size=64)
        assert failed == 3  # two query_en jobs + one title_en job in one batch
        assert out[0].query_en is None


def test_remote_provider_round_trip():
    import http.server
    import threading

    from relforge.dataio import RemoteProvider

    class Handler(http.server.BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            payload = json.dumps({"translations": [t.upper() for t in body["texts"]]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        provider = RemoteProvider(f"http://127.0.0.1:{server.server_port}/translate")
        assert provider.translate_batch(["abc", "def"]) == ["ABC", "DEF"]
    finally:
        server.shutdown()


class TestMakeProvider:
    def test_identity(self):
        assert isinstance(make_provider({"provider": "identity"}), IdentityProvider)

    def test_lookup(self, tmp_path):
        table = tmp_path / "table.json"
        table.write_text('{"a": "b"}', encoding="utf-8")
        provider = make_provider({"provider": "lookup", "lookup_path": str(table)})
        assert provider.translate_batch(["a", "x"]) == ["b", "x"]

    def test_lookup_requires_path(self):
        with pytest.raises(ConfigError):
            make_provider({"provider": "lookup"})

    def test_remote_requires_endpoint(self):
        with pytest.raises(ConfigError):
            make_provider({"provider": "remote"})

    def test_unknown(self):
        with pytest.raises(ConfigError):
            make_provider({"provider": "llm"})


class TestPredictions:
    def test_round_trip(self, tmp_path):
        preds = [
            Prediction(id="1", prob=0.25, leaf="Headphones"),
            Prediction(id="2", prob=1.0),
            Prediction(id="3", prob=0.0, leaf="Speäkers"),
        ]
        path = tmp_path / "p.jsonl"
        write_predictions(preds, str(path))
        assert read_predictions(str(path)) == preds

    def test_out_of_range_on_read(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text('{"id": "1", "prob": 0.5}\n{"id": "2", "prob": 1.5}\n', encoding="utf-8")
        with pytest.raises(DataError, match=":2"):
            read_predictions(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text("", encoding="utf-8")
        assert read_predictions(str(path)) == []

    def test_validation_on_construction(self):
        with pytest.raises(DataError):
            Prediction(id="", prob=0.5)
        with pytest.raises(DataError):
            Prediction(id="1", prob=-0.1)
