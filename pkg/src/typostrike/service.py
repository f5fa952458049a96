"""HTTP victim service and client.

Wire protocol, JSON over HTTP/1.1:

    POST /predict  {"texts": ["...", ...]} -> {"probs": [[p0..pk], ...]}
    GET  /health   -> {"classes": ["neg", "pos", ...]}

Errors: 400 malformed body, 422 empty texts, 503 model unavailable.
The client retries transport failures with exponential backoff, so a
served classifier can stand in for any externally hosted model.
"""

from __future__ import annotations

import json
import signal
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .errors import MalformedResponseError, TransportError

__all__ = ["PredictionServer", "serve", "RemoteClassifier", "VICTIM_URL_ENV"]

VICTIM_URL_ENV = "TYPOSTRIKE_VICTIM_URL"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path != "/health":
            self._send(404, {"error": "unknown path"})
            return
        classifier = self.server.classifier  # type: ignore[attr-defined]
        if classifier is None:
            self._send(503, {"error": "model unavailable"})
            return
        self._send(200, {"classes": list(classifier.class_names)})

    def do_POST(self) -> None:
        if self.path != "/predict":
            self._send(404, {"error": "unknown path"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            obj = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": "body is not valid JSON"})
            return
        if not isinstance(obj, dict) or "texts" not in obj:
            self._send(400, {"error": "expected an object with a 'texts' field"})
            return
        texts = obj["texts"]
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            self._send(400, {"error": "'texts' must be a list of strings"})
            return
        if not texts:
            self._send(422, {"error": "'texts' is empty"})
            return
        classifier = self.server.classifier  # type: ignore[attr-defined]
        if classifier is None:
            self._send(503, {"error": "model unavailable"})
            return
        try:
            probs = classifier.predict_proba(texts)
        except Exception:
            self._send(503, {"error": "model failed to answer"})
            return
        self._send(200, {"probs": [[float(p) for p in row] for row in probs]})

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        pass  # keep the serving process quiet; clients see the responses


class PredictionServer:
    """Expose a local classifier over the wire protocol.

    Binds immediately; ``start()`` serves from a daemon thread (tests),
    ``serve_forever()`` blocks (CLI). Port 0 picks a free port.
    """

    def __init__(self, classifier, host: str = "127.0.0.1", port: int = 8000):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.classifier = classifier  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "PredictionServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(classifier, bind: str = "127.0.0.1:8000") -> None:
    """Serve ``classifier`` at ``host:port``, blocking until SIGINT/SIGTERM."""
    host, _, port_text = bind.partition(":")
    try:
        port = int(port_text) if port_text else 8000
        server = PredictionServer(classifier, host or "127.0.0.1", port)
    except (ValueError, OSError) as exc:
        raise TransportError(f"cannot bind {bind!r}: {exc}") from exc

    def _stop(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, _stop)
    signal.signal(signal.SIGTERM, _stop)
    print(f"serving {len(classifier.class_names)} classes at {server.url}")
    server.serve_forever()


class RemoteClassifier:
    """Client for a served victim; satisfies the classifier contract.

    Connects eagerly: construction fetches /health to learn the class
    names, so a bad URL fails fast instead of mid-attack.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.25,
    ):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = requests.Session()
        health = self._request("get", "/health")
        classes = health.get("classes")
        if not isinstance(classes, list) or not classes:
            raise MalformedResponseError(f"{self.url}/health returned no class list")
        self.class_names = [str(c) for c in classes]

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.request(
                    method, self.url + path, json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise TransportError(
                    f"{method.upper()} {self.url}{path} -> {resp.status_code}: "
                    f"{resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponseError(
                    f"{self.url}{path} returned non-JSON body"
                ) from exc
        raise TransportError(
            f"{method.upper()} {self.url}{path} failed after "
            f"{self.retries + 1} attempts: {last_exc}"
        )

    def predict_proba(self, texts: list[str]) -> list[list[float]]:
        obj = self._request("post", "/predict", {"texts": list(texts)})
        probs = obj.get("probs")
        if not isinstance(probs, list) or len(probs) != len(texts):
            raise MalformedResponseError(
                f"expected {len(texts)} probability rows, got "
                f"{len(probs) if isinstance(probs, list) else type(probs).__name__}"
            )
        try:
            return [[float(p) for p in row] for row in probs]
        except (TypeError, ValueError) as exc:
            raise MalformedResponseError("probability rows are not numeric") from exc
