"""HTTP victim service and remote client."""

import pytest
import requests

from typostrike.classifier import CountedClassifier, QueryLedger, predict, train_naive_bayes
from typostrike.errors import TransportError
from typostrike.scoring import LabeledCorpus
from typostrike.service import PredictionServer, RemoteClassifier


@pytest.fixture(scope="module")
def nb():
    corpus = LabeledCorpus(
        [("good fine nice", 1), ("great good", 1), ("bad awful", 0), ("bad poor", 0)],
        ["neg", "pos"],
    )
    return train_naive_bayes(corpus)


@pytest.fixture(scope="module")
def server(nb):
    srv = PredictionServer(nb, port=0).start()
    yield srv
    srv.shutdown()


@pytest.fixture(scope="module")
def client(server):
    return RemoteClassifier(server.url, backoff=0.01)


class TestServer:
    def test_health_reports_classes(self, server):
        resp = requests.get(server.url + "/health", timeout=5)
        assert resp.status_code == 200
        assert resp.json() == {"classes": ["neg", "pos"]}

    def test_predict_roundtrip(self, server, nb):
        resp = requests.post(server.url + "/predict", json={"texts": ["good"]}, timeout=5)
        assert resp.status_code == 200
        probs = resp.json()["probs"]
        assert len(probs) == 1
        assert probs[0] == pytest.approx(nb.predict_proba(["good"])[0], abs=1e-9)

    def test_malformed_json_is_400(self, server):
        resp = requests.post(
            server.url + "/predict",
            data=b"{not json",
            headers={"Content-Type": "application/json"},
            timeout=5,
        )
        assert resp.status_code == 400

    def test_wrong_shape_is_400(self, server):
        for body in ({"nope": 1}, {"texts": "just one"}, {"texts": [1, 2]}):
            resp = requests.post(server.url + "/predict", json=body, timeout=5)
            assert resp.status_code == 400

    def test_empty_texts_is_422(self, server):
        resp = requests.post(server.url + "/predict", json={"texts": []}, timeout=5)
        assert resp.status_code == 422

    def test_unknown_path_is_404(self, server):
        assert requests.get(server.url + "/nope", timeout=5).status_code == 404
        assert requests.post(server.url + "/nope", json={}, timeout=5).status_code == 404

    def test_unavailable_model_is_503(self):
        srv = PredictionServer(None, port=0).start()
        try:
            assert requests.get(srv.url + "/health", timeout=5).status_code == 503
            resp = requests.post(srv.url + "/predict", json={"texts": ["x"]}, timeout=5)
            assert resp.status_code == 503
        finally:
            srv.shutdown()

    def test_failing_model_is_503(self):
        class Broken:
            class_names = ["a", "b"]

            def predict_proba(self, texts):
                raise RuntimeError("boom")

        srv = PredictionServer(Broken(), port=0).start()
        try:
            resp = requests.post(srv.url + "/predict", json={"texts": ["x"]}, timeout=5)
            assert resp.status_code == 503
        finally:
            srv.shutdown()


class TestRemoteClassifier:
    def test_learns_classes_from_health(self, client):
        assert client.class_names == ["neg", "pos"]

    def test_matches_local_predictions(self, client, nb):
        texts = ["good fine", "bad awful thing", "nice", "zzz unknown"]
        remote = predict(client, texts)
        local = predict(nb, texts)
        for r, l in zip(remote, local):
            assert r.predicted == l.predicted
            for a, b in zip(r.probs, l.probs):
                assert a == pytest.approx(b, abs=1e-6)

    def test_counts_once_per_text_through_ledger(self, client):
        ledger = QueryLedger()
        counted = CountedClassifier(client, ledger)
        counted.predict_proba(["good", "bad"])
        counted.predict_proba(["fine"])
        assert ledger.total_queries == 3

    def test_dead_endpoint_raises_transport_error(self):
        with pytest.raises(TransportError):
            RemoteClassifier("http://127.0.0.1:1", timeout=0.2, retries=1, backoff=0.01)

    def test_retries_transient_failures(self, nb):
        """Two connection failures then success: the call still lands."""
        srv = PredictionServer(nb, port=0).start()
        try:
            client = RemoteClassifier(srv.url, backoff=0.01)

            calls = {"n": 0}
            original = client._session.request

            def flaky(method, url, **kwargs):
                calls["n"] += 1
                if calls["n"] <= 2:
                    raise requests.ConnectionError("transient")
                return original(method, url, **kwargs)

            client._session.request = flaky
            probs = client.predict_proba(["good"])
            assert len(probs) == 1
            assert calls["n"] == 3
        finally:
            srv.shutdown()
