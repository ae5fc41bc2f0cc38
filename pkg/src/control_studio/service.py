"""HTTP prediction service.

One checkpoint per process, loaded once and immutable afterwards; every
response is a pure function of the request, so concurrent identical
requests return identical bodies. JSON over HTTP/1.1:

    GET  /api/health                 fingerprint, family, uptime
    GET  /api/sentences              sentence listing with lengths
    GET  /api/sentences/{id}         phones, style, renditions (both unit systems)
    GET  /api/speakers               speaker ids with normalisation stats
    GET  /api/styles                 style ids
    POST /api/predict                PredictRequest -> PredictResponse

Driving values in requests are in normalised units; responses carry the
predicted sequence in both normalised and denormalised units.
"""

from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .corpus import Corpus, denormalize_paf, normalize_renditions, stats_arrays
from .models.families import Micvae, NoControl, per_value_weights
from .paf import STREAMS, DrivingSet, DrivingSetError, DrivingValue
from .training.checkpoint import TrainedBundle

__all__ = ["ServiceState", "make_server", "serve_forever"]


class RequestProblem(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class ServiceState:
    """Immutable-after-init bundle of model, corpus, and lookup caches."""

    def __init__(self, bundle: TrainedBundle, corpus: Corpus):
        self.bundle = bundle
        self.corpus = corpus
        self.started = time.time()
        self.stats = bundle.stats
        self._renditions: dict[str, list[dict]] = {}
        for r in corpus.renditions:
            try:
                norm = normalize_renditions([r], self.stats)[0].paf
            except Exception:
                continue  # speaker absent from training stats
            self._renditions.setdefault(r.sentence_id, []).append({
                "actor_id": r.actor_id,
                "paf_normalized": norm.tolist(),
                "paf_denormalized": r.paf.tolist(),
            })

    # --- route handlers ----------------------------------------------------

    def health(self) -> dict:
        return {
            "fingerprint": self.bundle.fingerprint,
            "family": self.bundle.config.family,
            "uptime_seconds": time.time() - self.started,
        }

    def sentences(self) -> list[dict]:
        out = []
        for sid in sorted(self.corpus.sentences):
            sent = self.corpus.sentences[sid]
            out.append({
                "sentence_id": sid,
                "length": sent.length,
                "style_id": sent.style_id,
                "split": self.corpus.split.of(sid),
                "rendition_actors": sorted(r["actor_id"] for r in self._renditions.get(sid, [])),
            })
        return out

    def sentence_detail(self, sid: str) -> dict:
        if sid not in self.corpus.sentences:
            raise RequestProblem(404, f"unknown sentence_id {sid!r}")
        sent = self.corpus.sentences[sid]
        return {
            "sentence_id": sid,
            "length": sent.length,
            "phone_ids": list(sent.phone_ids),
            "style_id": sent.style_id,
            "split": self.corpus.split.of(sid),
            "renditions": self._renditions.get(sid, []),
        }

    def speakers(self) -> list[dict]:
        return [{"id": spk, "stats": self.stats[spk]} for spk in sorted(self.stats)]

    def styles(self) -> list[dict]:
        return [{"id": s} for s in range(self.bundle.config.style_count)]

    def predict(self, payload: dict) -> dict:
        for fieldname in ("sentence_id", "target_speaker", "style_id", "driving"):
            if fieldname not in payload:
                raise RequestProblem(400, f"missing field {fieldname!r}")
        sid = payload["sentence_id"]
        if not isinstance(sid, str) or sid not in self.corpus.sentences:
            raise RequestProblem(404, f"unknown sentence_id {sid!r}")
        sent = self.corpus.sentences[sid]
        speaker = payload["target_speaker"]
        if not isinstance(speaker, int) or speaker not in self.stats:
            raise RequestProblem(404, f"unknown target_speaker {speaker!r}")
        style = payload["style_id"]
        if not isinstance(style, int) or not (0 <= style < self.bundle.config.style_count):
            raise RequestProblem(404, f"unknown style_id {style!r}")
        if not isinstance(payload["driving"], list):
            raise RequestProblem(400, "field 'driving' must be a list")

        values = []
        for i, item in enumerate(payload["driving"]):
            for sub in ("position", "stream", "value"):
                if not isinstance(item, dict) or sub not in item:
                    raise RequestProblem(400, f"driving[{i}] missing field {sub!r}")
            if item["stream"] not in STREAMS:
                raise RequestProblem(400, f"driving[{i}].stream must be one of {STREAMS}")
            if not isinstance(item["position"], int):
                raise RequestProblem(400, f"driving[{i}].position must be an integer")
            try:
                value = float(item["value"])
            except (TypeError, ValueError):
                raise RequestProblem(400, f"driving[{i}].value must be a number") from None
            values.append(DrivingValue(item["position"], item["stream"], value))
        if len(values) > 3 * sent.length:
            raise RequestProblem(422, f"driving set of size {len(values)} exceeds "
                                      f"3*T={3 * sent.length}")
        try:
            ds = DrivingSet(values)
            ds.validate_for_length(sent.length)
        except DrivingSetError as e:
            raise RequestProblem(422, str(e)) from None

        model = self.bundle.model
        if isinstance(model, NoControl):
            if len(ds) > 0:
                raise RequestProblem(422, "this checkpoint has no sparse-conditioning input")
            paf = model.predict(sent, speaker, style)
            weights = np.zeros(0)
            mu_norm = 0.0
        elif isinstance(model, Micvae):
            lg, weights = model.mi_encoder.encode(ds, sent.length)
            weights = per_value_weights(weights)
            paf = model.decode_with_latent(sent, speaker, style, lg.mu).data.copy()
            mu_norm = float(np.linalg.norm(lg.mu))
        else:
            lg = model.posterior(sent, ds)
            paf = model.decode_with_latent(sent, speaker, style, lg.mu).data.copy()
            weights = np.zeros(0)
            mu_norm = float(np.linalg.norm(lg.mu))

        return {
            "paf_normalized": paf.tolist(),
            "paf_denormalized": denormalize_paf(paf, self.stats, speaker).tolist(),
            "attention_weights": [float(w) for w in np.ravel(weights)],
            "latent_mu_norm": mu_norm,
            "model_fingerprint": self.bundle.fingerprint,
        }


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState = None  # bound by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send(status, {"error": message})

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            if self.path == "/api/health":
                self._send(200, self.state.health())
            elif self.path == "/api/sentences":
                self._send(200, self.state.sentences())
            elif self.path == "/api/speakers":
                self._send(200, self.state.speakers())
            elif self.path == "/api/styles":
                self._send(200, self.state.styles())
            else:
                m = re.fullmatch(r"/api/sentences/([^/]+)", self.path)
                if m:
                    self._send(200, self.state.sentence_detail(m.group(1)))
                else:
                    self._error(404, f"no such endpoint {self.path}")
        except RequestProblem as e:
            self._error(e.status, str(e))

    def do_POST(self):
        if self.path != "/api/predict":
            self._error(404, f"no such endpoint {self.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError as e:
                raise RequestProblem(400, f"request body is not valid JSON: {e}") from None
            if not isinstance(payload, dict):
                raise RequestProblem(400, "request body must be a JSON object")
            self._send(200, self.state.predict(payload))
        except RequestProblem as e:
            self._error(e.status, str(e))


def make_server(bundle: TrainedBundle, corpus: Corpus, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    state = ServiceState(bundle, corpus)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> None:
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
