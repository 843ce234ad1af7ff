"""Reference model server exposing any backend over the wire protocol.

Useful for exercising the ``--backend server`` path without real models
(serve a :class:`~vand.backends.mock.MockBackend`) and as the executable
documentation of the protocol that real model adapters must speak.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .base import Backend, ContractError
from .wire import decode_image, encode_mask, encode_score_map


def _make_handler(backend: Backend):
    lock = threading.Lock()
    serialize = not backend.descriptor.concurrent_safe

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _ok(self, extra: dict) -> None:
            payload = {
                "backend": backend.descriptor.name,
                "descriptor": backend.descriptor.to_dict(),
            }
            payload.update(extra)
            self._send(200, payload)

        def _fail(self, status: int, code: str, message: str) -> None:
            self._send(status, {"code": code, "message": message})

        def do_GET(self) -> None:
            if self.path == "/describe":
                self._ok({})
            else:
                self._fail(404, "unknown_endpoint", f"no such endpoint: {self.path}")

        def do_POST(self) -> None:
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                if not isinstance(body, dict):
                    raise ValueError("request body must be a JSON object")
            except (ValueError, json.JSONDecodeError) as err:
                self._fail(400, "bad_request", str(err))
                return
            try:
                if serialize:
                    with lock:
                        extra = self._dispatch(self.path, body)
                else:
                    extra = self._dispatch(self.path, body)
            except KeyError as err:
                self._fail(400, "bad_request", f"missing field {err}")
            except (ContractError, ValueError) as err:
                self._fail(400, "contract", str(err))
            except LookupError:
                self._fail(404, "unknown_endpoint", f"no such endpoint: {self.path}")
            except Exception as err:  # surface anything else as a server error
                self._fail(500, "internal", str(err))
            else:
                self._ok(extra)

        def _dispatch(self, path: str, body: dict) -> dict:
            if path == "/embed_text":
                embeddings = backend.embed_text(list(body["prompts"]))
                return {"embeddings": embeddings.tolist()}
            if path == "/embed_image":
                embedding = backend.embed_image(decode_image(body["image"]))
                return {"embedding": embedding.tolist()}
            if path == "/propose_masks":
                proposals = backend.propose_masks(decode_image(body["image"]))
                return {"masks": [encode_mask(m) for m in proposals.masks]}
            if path == "/salient_mask":
                mask = backend.salient_mask(decode_image(body["image"]))
                return {"mask": encode_mask(mask)}
            if path == "/segment":
                score_map = backend.segment_by_prompt(
                    decode_image(body["image"]), body["prompt"]
                )
                return {"map": encode_score_map(score_map)}
            raise LookupError(path)

    return Handler


class BackendServer:
    """Threaded HTTP server wrapping a backend; use as a context manager."""

    def __init__(self, backend: Backend, host: str = "127.0.0.1", port: int = 0):
        self._server = ThreadingHTTPServer((host, port), _make_handler(backend))
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BackendServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "BackendServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        """Run in the foreground until interrupted."""
        try:
            self._thread.start()
            self._thread.join()
        except KeyboardInterrupt:
            self.stop()
