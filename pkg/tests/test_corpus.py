import pytest

from modelzip.corpus import (
    CorpusError,
    CorpusManifest,
    content_hash,
    ingest,
    load_bucket,
    parse_year_month,
)
from modelzip.synthdata import build_fixture_corpus


class TestParseYearMonth:
    def test_valid(self):
        assert parse_year_month("2023-05") == (2023, 5)

    @pytest.mark.parametrize("bad", ["2023-13", "2023-00", "1999-01", "2101-01",
                                     "2023-1", "banana", "2023/05"])
    def test_invalid(self, bad):
        with pytest.raises(CorpusError):
            parse_year_month(bad)


class TestIngest:
    def test_empty_directory(self, tmp_path):
        manifest = ingest(tmp_path, dataset="empty")
        assert manifest.entries == []
        assert manifest.months() == []

    def test_three_files_one_month(self, tmp_path):
        month = tmp_path / "wikitext" / "2023-05"
        month.mkdir(parents=True)
        for i in range(3):
            (month / f"doc-{i}.txt").write_text(f"document {i}")
        manifest = ingest(tmp_path / "wikitext")
        assert manifest.dataset == "wikitext"
        assert len(manifest.entries) == 3
        assert all(e.year_month == "2023-05" for e in manifest.entries)
        assert [e.doc_id for e in manifest.entries] == sorted(
            e.doc_id for e in manifest.entries
        )

    def test_invalid_month_directory_names_path(self, tmp_path):
        bad = tmp_path / "2023-13"
        bad.mkdir()
        (bad / "doc.txt").write_text("x")
        with pytest.raises(CorpusError, match="2023-13"):
            ingest(tmp_path)

    def test_unknown_extension_names_path(self, tmp_path):
        month = tmp_path / "2023-01"
        month.mkdir()
        (month / "image.png").write_bytes(b"\x89PNG")
        with pytest.raises(CorpusError, match="image.png"):
            ingest(tmp_path)

    def test_idempotent(self, tmp_path):
        build_fixture_corpus(tmp_path / "c")
        a = ingest(tmp_path / "c")
        b = ingest(tmp_path / "c")
        assert a.to_dict() == b.to_dict()

    def test_manifest_save_load(self, tmp_path):
        build_fixture_corpus(tmp_path / "c")
        manifest = ingest(tmp_path / "c")
        manifest.save(tmp_path / "manifest.json")
        assert CorpusManifest.load(tmp_path / "manifest.json").to_dict() == manifest.to_dict()


class TestLoadBucket:
    @pytest.fixture()
    def corpus(self, tmp_path):
        root = tmp_path / "set"
        build_fixture_corpus(root, months=("2023-01", "2023-02"), docs_per_month=2)
        return root, ingest(root)

    def test_text_documents_decoded(self, corpus):
        root, manifest = corpus
        docs = load_bucket(manifest, "2023-01", root)
        text_docs = [d for d in docs if d.modality == "text"]
        assert text_docs and all(d.text is not None for d in text_docs)
        assert [d.doc_id for d in docs] == sorted(d.doc_id for d in docs)

    def test_byte_documents_raw(self, corpus):
        root, manifest = corpus
        docs = load_bucket(manifest, "2023-01", root)
        byte_docs = [d for d in docs if d.modality == "bytes"]
        assert byte_docs and all(d.text is None for d in byte_docs)

    def test_bytes_preserved_exactly(self, corpus):
        root, manifest = corpus
        before = {
            e.doc_id: content_hash((root / e.path).read_bytes())
            for e in manifest.bucket("2023-02")
        }
        docs = load_bucket(manifest, "2023-02", root)
        assert {d.doc_id: content_hash(d.data) for d in docs} == before

    def test_truncated_file_is_integrity_error(self, corpus):
        root, manifest = corpus
        victim = root / manifest.bucket("2023-01")[0].path
        victim.write_bytes(victim.read_bytes()[:-10])
        with pytest.raises(CorpusError, match="integrity"):
            load_bucket(manifest, "2023-01", root)

    def test_missing_file(self, corpus):
        root, manifest = corpus
        (root / manifest.bucket("2023-01")[0].path).unlink()
        with pytest.raises(CorpusError, match="missing"):
            load_bucket(manifest, "2023-01", root)

    def test_missing_bucket(self, corpus):
        root, manifest = corpus
        with pytest.raises(CorpusError, match="no documents"):
            load_bucket(manifest, "2021-01", root)

    def test_invalid_utf8_text_rejected(self, tmp_path):
        month = tmp_path / "2023-01"
        month.mkdir()
        (month / "broken.txt").write_bytes(b"\xff\xfe broken")
        manifest = ingest(tmp_path)
        with pytest.raises(CorpusError, match="not valid UTF-8"):
            load_bucket(manifest, "2023-01", tmp_path)
