import json

import numpy as np
import pytest
from helpers import blob_features, write_dataset_csv

from pgmclassifier import (
    DatasetFormatError,
    EncodingConfig,
    FingerprintMismatch,
    PgmConfig,
    SchemaMismatch,
    check_splits,
    features_for_model,
    fingerprint_bytes,
    fingerprint_file,
    fit_pgm,
    load_dataset,
    load_model,
    predict_batch,
    read_splits,
    report_from_predictions,
    save_model,
    score_states,
    stratified_holdout,
    write_long_csv,
    write_predictions_csv,
    write_splits,
)
from pgmclassifier.dataio import (
    evaluation_csv_rows,
    evaluation_report_dict,
    flat_with_names,
    protocol_csv_rows,
    protocol_report_dict,
    read_json,
    report_dict,
    write_json,
)


@pytest.fixture
def dataset_path(tmp_path):
    features, labels = blob_features(4.0, 8, seed=123)
    names = np.array(["ant", "bee", "cat"])[labels]
    return write_dataset_csv(tmp_path / "data.csv", features, names)


class TestLoadDataset:
    def test_round_trip(self, tmp_path):
        features = np.array([[1.5, -2.25], [0.0, 3.125]])
        path = write_dataset_csv(tmp_path / "d.csv", features, ["b", "a"])
        ds = load_dataset(path)
        np.testing.assert_array_equal(ds.features, features)
        assert ds.feature_names == ("f0", "f1")
        assert ds.labels == ("b", "a")
        assert ds.classes == ("a", "b")
        np.testing.assert_array_equal(ds.label_indices, [1, 0])
        assert ds.n_samples == 2
        assert ds.n_classes == 2

    def test_exact_float_round_trip(self, tmp_path):
        features = np.array([[0.1 + 0.2], [1e-17], [123456.789012345678]])
        path = write_dataset_csv(tmp_path / "d.csv", features, ["x", "x", "x"])
        np.testing.assert_array_equal(load_dataset(path).features, features)

    def test_unlabeled_dataset(self, tmp_path):
        path = write_dataset_csv(tmp_path / "d.csv", np.ones((2, 2)))
        ds = load_dataset(path)
        assert ds.labels is None
        assert ds.classes is None
        assert ds.label_column is None
        assert ds.feature_names == ("f0", "f1")

    def test_custom_label_column(self, tmp_path):
        path = write_dataset_csv(
            tmp_path / "d.csv", np.ones((2, 1)), ["u", "v"], label_column="target"
        )
        ds = load_dataset(path, label_column="target")
        assert ds.labels == ("u", "v")
        with pytest.raises(DatasetFormatError, match="'target'"):
            load_dataset(path)

    @pytest.mark.parametrize(
        "cell, fragment",
        [("", "row 2 column 'f1'"), ("abc", "row 2 column 'f1'"), ("inf", "row 2"), ("nan", "row 2")],
    )
    def test_bad_cell_diagnostics(self, tmp_path, cell, fragment):
        path = tmp_path / "bad.csv"
        path.write_text(f"f0,f1,label\n1.0,2.0,a\n3.0,{cell},b\n")
        with pytest.raises(DatasetFormatError, match=fragment):
            load_dataset(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n1.0,2.0,a\n3.0,b\n")
        with pytest.raises(DatasetFormatError, match="row 2"):
            load_dataset(path)

    def test_duplicate_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f0,label\n1.0,2.0,a\n")
        with pytest.raises(DatasetFormatError, match="duplicate"):
            load_dataset(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("")
        with pytest.raises(DatasetFormatError, match="header"):
            load_dataset(path)

    def test_missing_label_cell_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,label\n1.0,a\n2.0,\n")
        with pytest.raises(DatasetFormatError, match="missing label"):
            load_dataset(path)


class TestFingerprint:
    def test_line_ending_insensitive(self):
        lf = fingerprint_bytes(b"a,b\n1,2\n")
        crlf = fingerprint_bytes(b"a,b\r\n1,2\r\n")
        cr = fingerprint_bytes(b"a,b\r1,2\r")
        assert lf == crlf == cr
        assert lf["algorithm"] == "sha256/lf-newlines"

    def test_content_sensitive(self):
        assert fingerprint_bytes(b"a\n") != fingerprint_bytes(b"b\n")

    def test_file_matches_bytes(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_bytes(b"f0\n1.0\n")
        assert fingerprint_file(path) == fingerprint_bytes(b"f0\n1.0\n")

    def test_dataset_keeps_raw_fingerprint(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_bytes(b"f0,label\r\n1.0,a\r\n2.5,a\r\n")
        ds = load_dataset(path)
        assert ds.fingerprint == fingerprint_bytes(b"f0,label\n1.0,a\n2.5,a\n")


class TestSplitsFile:
    def test_round_trip(self, tmp_path, dataset_path):
        ds = load_dataset(dataset_path)
        plans = stratified_holdout(ds.label_indices, 0.25, 3, seed=10)
        out = tmp_path / "splits.json"
        write_splits(out, plans, fingerprint=ds.fingerprint, test_fraction=0.25, seed=10)
        data = read_splits(out)
        assert data.seed == 10
        assert data.test_fraction == 0.25
        assert data.fingerprint == ds.fingerprint
        assert len(data.plans) == 3
        for original, loaded in zip(plans, data.plans):
            assert loaded.repetition_id == original.repetition_id
            assert loaded.seed == original.seed
            np.testing.assert_array_equal(loaded.train_indices, original.train_indices)
            np.testing.assert_array_equal(loaded.test_indices, original.test_indices)
        check_splits(data, ds)

    def test_fingerprint_mismatch(self, tmp_path, dataset_path):
        ds = load_dataset(dataset_path)
        plans = stratified_holdout(ds.label_indices, 0.25, 1, seed=10)
        out = tmp_path / "splits.json"
        write_splits(
            out, plans, fingerprint=fingerprint_bytes(b"other"), test_fraction=0.25, seed=10
        )
        with pytest.raises(FingerprintMismatch):
            check_splits(read_splits(out), ds)

    def test_invalid_partition(self, tmp_path, dataset_path):
        ds = load_dataset(dataset_path)
        plans = stratified_holdout(ds.label_indices, 0.25, 1, seed=10)
        out = tmp_path / "splits.json"
        write_splits(out, plans, fingerprint=ds.fingerprint, test_fraction=0.25, seed=10)
        obj = json.loads(out.read_text())
        obj["repetitions"][0]["test"] = obj["repetitions"][0]["test"][:-1]
        write_json(out, obj)
        with pytest.raises(SchemaMismatch, match="partition"):
            check_splits(read_splits(out), ds)

    def test_wrong_format_tag(self, tmp_path):
        out = tmp_path / "splits.json"
        write_json(out, {"format": "pgm-model/1"})
        with pytest.raises(SchemaMismatch, match="expected format"):
            read_splits(out)

    def test_empty_plans_rejected(self, tmp_path):
        out = tmp_path / "splits.json"
        write_json(
            out,
            {
                "format": "pgm-splits/1",
                "fingerprint": {},
                "seed": 0,
                "test_fraction": 0.2,
                "repetitions": [],
            },
        )
        with pytest.raises(SchemaMismatch, match="no repetitions"):
            read_splits(out)

    def test_malformed_repetition_rejected(self, tmp_path):
        out = tmp_path / "splits.json"
        write_json(
            out,
            {
                "format": "pgm-splits/1",
                "fingerprint": {},
                "seed": 0,
                "test_fraction": 0.2,
                "repetitions": [{"repetition": 0}],
            },
        )
        with pytest.raises(SchemaMismatch, match="malformed"):
            read_splits(out)


class TestModelFile:
    def fit(self, copies, engine="auto"):
        rng = np.random.default_rng(8)
        features = rng.normal(size=(20, 3))
        labels = np.array([0, 1] * 10)
        config = PgmConfig(
            encoding=EncodingConfig(encoding="amplitude", alpha=2.0),
            copies=copies,
            engine=engine,
        )
        return features, labels, fit_pgm(features, labels, 2, config)

    @pytest.mark.parametrize("copies, engine", [(2, "dense"), (9, "gram")])
    def test_round_trip_scores_exactly(self, tmp_path, copies, engine):
        features, labels, model = self.fit(copies)
        assert model.engine == engine
        out = tmp_path / "model.json"
        save_model(out, model, classes=("no", "yes"), feature_columns=("a", "b", "c"))
        loaded = load_model(out)
        assert loaded.classes == ("no", "yes")
        assert loaded.feature_columns == ("a", "b", "c")
        assert loaded.model.engine == engine
        before = predict_batch(model, features)
        after = predict_batch(loaded.model, features)
        np.testing.assert_array_equal(before[0], after[0])
        np.testing.assert_array_equal(before[1], after[1])

    def test_pipeline_required(self, tmp_path):
        rng = np.random.default_rng(9)
        from helpers import random_labeled_states

        from pgmclassifier import build_dense_pgm

        bare = build_dense_pgm(random_labeled_states(rng, 2, 3, 6))
        with pytest.raises(SchemaMismatch, match="pipeline"):
            save_model(tmp_path / "m.json", bare, classes=("a", "b"), feature_columns=("x",))

    def test_unknown_engine_rejected(self, tmp_path):
        _, _, model = self.fit(1)
        out = tmp_path / "model.json"
        save_model(out, model, classes=("a", "b"), feature_columns=("a", "b", "c"))
        obj = json.loads(out.read_text())
        obj["engine"] = "sparse"
        write_json(out, obj)
        with pytest.raises(SchemaMismatch, match="unknown engine"):
            load_model(out)

    def test_missing_payload_rejected(self, tmp_path):
        _, _, model = self.fit(1)
        out = tmp_path / "model.json"
        save_model(out, model, classes=("a", "b"), feature_columns=("a", "b", "c"))
        obj = json.loads(out.read_text())
        del obj["payload"]
        write_json(out, obj)
        with pytest.raises(SchemaMismatch, match="malformed"):
            load_model(out)

    def test_class_count_mismatch_rejected(self, tmp_path):
        _, _, model = self.fit(1)
        out = tmp_path / "model.json"
        save_model(out, model, classes=("a", "b"), feature_columns=("a", "b", "c"))
        obj = json.loads(out.read_text())
        obj["classes"] = ["a", "b", "c"]
        write_json(out, obj)
        with pytest.raises(SchemaMismatch, match="class names"):
            load_model(out)


class TestFeaturesForModel:
    def test_reorders_columns(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("b,a\n2.0,1.0\n4.0,3.0\n")
        ds = load_dataset(path)
        np.testing.assert_array_equal(
            features_for_model(ds, ("a", "b")), [[1.0, 2.0], [3.0, 4.0]]
        )

    def test_label_column_ignored(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n1.0,x\n")
        ds = load_dataset(path)
        np.testing.assert_array_equal(features_for_model(ds, ("a",)), [[1.0]])

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a\n1.0\n")
        with pytest.raises(SchemaMismatch, match="'b'"):
            features_for_model(load_dataset(path), ("a", "b"))

    def test_extra_column_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,z\n1.0,2.0\n")
        with pytest.raises(SchemaMismatch, match="'z'"):
            features_for_model(load_dataset(path), ("a",))


def toy_report(positive_class=None):
    true = np.array([0, 0, 1, 1])
    pred = np.array([0, 1, 1, 1])
    scores = np.array([[0.9, 0.1], [0.4, 0.6], [0.2, 0.8], [0.3, 0.7]])
    return report_from_predictions(true, pred, scores, 2, positive_class)


class TestReportSerialization:
    def test_report_dict_names_classes(self):
        obj = report_dict(toy_report(1), ("neg", "pos"), "pos")
        assert set(obj["per_class"]) == {"neg", "pos"}
        assert obj["binary"]["positive_class"] == "pos"
        assert obj["n_samples"] == 4
        assert obj["accuracy"] == 0.75

    def test_flat_with_names(self):
        flat = flat_with_names(toy_report(), ("neg", "pos"))
        assert "recall_class_pos" in flat
        assert "recall_class_1" not in flat
        assert flat["accuracy"] == 0.75

    def test_evaluation_report_is_json_ready(self, tmp_path):
        obj = evaluation_report_dict(
            toy_report(1),
            ("neg", "pos"),
            dataset_fingerprint=fingerprint_bytes(b"x"),
            model_echo={"engine": "dense"},
            positive_name="pos",
        )
        out = tmp_path / "report.json"
        write_json(out, obj)
        loaded = read_json(out, "pgm-report/1")
        assert loaded["kind"] == "evaluate"
        assert loaded == json.loads(json.dumps(obj))

    def test_evaluation_csv_rows_cover_flat(self):
        rows = evaluation_csv_rows(toy_report(), ("neg", "pos"))
        assert all(row[0] == "all" for row in rows)
        metrics = {(m, c) for _, m, c, _ in rows}
        assert ("accuracy", "") in metrics
        assert ("auc", "pos") in metrics
        assert len(rows) == len(toy_report().flat())

    def test_protocol_dict_and_csv(self, tmp_path):
        from pgmclassifier import ProtocolConfig, make_grid, run_protocol

        features, labels = blob_features(4.0, 12, seed=3)
        splits = stratified_holdout(labels, 0.25, 2, seed=4)
        config = ProtocolConfig(
            seed=5,
            grid=make_grid(encodings=("stereographic",), alphas=(1.0,), copies=(1, 2)),
            k=3,
            cv_repetitions=1,
        )
        result = run_protocol(features, labels, 3, splits, config)
        obj = protocol_report_dict(
            result,
            ("a", "b", "c"),
            dataset_fingerprint=fingerprint_bytes(b"x"),
            seed=5,
            positive_name=None,
        )
        out = tmp_path / "protocol.json"
        write_json(out, obj)
        loaded = read_json(out, "pgm-report/1")
        assert loaded["kind"] == "protocol"
        assert loaded["selection"]["chosen_index"] == result.selection.chosen_index
        assert len(loaded["splits"]) == 2
        assert len(loaded["config"]["grid"]) == 2
        rows = protocol_csv_rows(result, ("a", "b", "c"))
        split_values = {row[0] for row in rows}
        assert {"0", "1", "mean", "std"} <= split_values
        csv_path = tmp_path / "protocol.csv"
        write_long_csv(csv_path, rows)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "split,metric,class,value"
        assert len(lines) == len(rows) + 1


class TestCsvWriters:
    def test_long_csv_formats_values(self, tmp_path):
        out = tmp_path / "x.csv"
        write_long_csv(out, [("all", "accuracy", "", 0.1 + 0.2), ("all", "auc", "a", None)])
        lines = out.read_text().splitlines()
        assert lines[1] == f"all,accuracy,,{0.1 + 0.2!r}"
        assert lines[2] == "all,auc,a,"

    def test_predictions_csv(self, tmp_path):
        out = tmp_path / "preds.csv"
        write_predictions_csv(
            out, ["yes", "no"], np.array([[0.25, 0.75], [0.5, 0.5]]), ("no", "yes")
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "row,predicted,score_no,score_yes"
        assert lines[1] == "0,yes,0.25,0.75"
        assert lines[2] == "1,no,0.5,0.5"

    def test_predictions_csv_empty(self, tmp_path):
        out = tmp_path / "preds.csv"
        write_predictions_csv(out, [], np.zeros((0, 2)), ("a", "b"))
        assert out.read_text() == "row,predicted,score_a,score_b\n"

    def test_write_json_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        payload = {"format": "pgm-report/1", "value": 0.1 + 0.2, "items": [1, 2]}
        write_json(a, payload)
        write_json(b, payload)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().endswith(b"\n")

    def test_write_json_rejects_nan(self, tmp_path):
        with pytest.raises(ValueError):
            write_json(tmp_path / "x.json", {"format": "pgm-report/1", "v": float("nan")})


class TestScoreSerializationExactness:
    def test_model_json_floats_round_trip(self, tmp_path):
        rng = np.random.default_rng(77)
        features = rng.normal(size=(12, 2))
        labels = np.array([0, 1] * 6)
        model = fit_pgm(features, labels, 2, PgmConfig(copies=3))
        out = tmp_path / "m.json"
        save_model(out, model, classes=("a", "b"), feature_columns=("x", "y"))
        loaded = load_model(out).model
        np.testing.assert_array_equal(loaded.povm, model.povm)
        states = rng.normal(size=(5, 3))
        states /= np.linalg.norm(states, axis=1, keepdims=True)
        np.testing.assert_array_equal(
            score_states(loaded, states), score_states(model, states)
        )
