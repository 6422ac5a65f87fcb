"""Stateless HTTP inference service over a frozen checkpoint.

Endpoints:

``GET /health``
    ``{"status": "ok", "checkpoint_id": "<sha256 prefix>"}``

``GET /attributes``
    ``{"names": [...], "style_counts": [...]}`` in model order.

``POST /edit``
    JSON body ``{"image": <base64 PNG/JPEG>, "target": {name: value},
    "styles": {name: index}}`` or a multipart form with an ``image`` file
    part and optional ``target``/``styles`` JSON fields. Attributes absent
    from ``target`` default to the model's own classifier prediction on the
    input, so clients only send what they touched. Responds with
    ``{"image": <base64 PNG>, "attributes": {...}, "latency_ms": ...}``.

Validation failures return 400 with a field-level message, oversize bodies
413, unknown routes 404, and internal failures 500 with an opaque id. The
loaded parameters are never mutated; identical requests produce
byte-identical responses.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import io
import json
import os
import threading
import time
import uuid
from email.parser import BytesParser
from email.policy import default as default_policy
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .data import preprocess_image, to_image_array, to_image_tensor
from .networks import AttrEditModel
from .training import model_from_checkpoint

MAX_BODY_BYTES = 10 * 1024 * 1024

HOST_ENV = "ATTREDIT_HOST"
PORT_ENV = "ATTREDIT_PORT"


class ValidationError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class EditService:
    """Owns the frozen model and performs one edit per request."""

    def __init__(self, model: AttrEditModel, checkpoint_id: str):
        model.eval()
        for p in model.parameters():
            p.requires_grad_(False)
        self.model = model
        self.checkpoint_id = checkpoint_id
        self.names = model.attr_names
        self.style_counts = model.config.style_counts or tuple(
            1 for _ in self.names
        )
        self._lock = threading.Lock()

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "EditService":
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
        return cls(model_from_checkpoint(path), digest)

    # -- request handling -----------------------------------------------------

    def attribute_schema(self) -> dict:
        return {"names": list(self.names), "style_counts": list(self.style_counts)}

    def validate_target(self, target: dict) -> dict[str, float]:
        if not isinstance(target, dict):
            raise ValidationError("target", "must be an object of name: value")
        resolved = {}
        for name, value in target.items():
            if name not in self.names:
                raise ValidationError(f"target.{name}", "unknown attribute name")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError(f"target.{name}", "value must be a number")
            value = float(value)
            if not 0.0 <= value <= 1.0 or value != value:
                raise ValidationError(
                    f"target.{name}", f"value {value} outside [0, 1]"
                )
            resolved[name] = value
        return resolved

    def validate_styles(self, styles: dict) -> dict[str, int]:
        if not isinstance(styles, dict):
            raise ValidationError("styles", "must be an object of name: index")
        resolved = {}
        for name, index in styles.items():
            if name not in self.names:
                raise ValidationError(f"styles.{name}", "unknown attribute name")
            if not isinstance(index, int) or isinstance(index, bool):
                raise ValidationError(f"styles.{name}", "index must be an integer")
            count = self.style_counts[self.names.index(name)]
            if not 0 <= index < count:
                raise ValidationError(
                    f"styles.{name}", f"index {index} outside [0, {count})"
                )
            resolved[name] = index
        return resolved

    def decode_image(self, payload: bytes) -> np.ndarray:
        try:
            with Image.open(io.BytesIO(payload)) as img:
                return preprocess_image(img.convert("RGB"), self.model.config.resolution)
        except (UnidentifiedImageError, OSError, ValueError) as err:
            raise ValidationError("image", f"undecodable image payload ({err})")

    def edit(self, image: np.ndarray, target: dict[str, float],
             styles: dict[str, int]) -> tuple[bytes, dict[str, float], float]:
        start = time.perf_counter()
        x = to_image_tensor(image[None])
        with self._lock, torch.no_grad():
            predicted = self.model.classify(x)[0].numpy()
            resolved = (predicted >= 0.5).astype(np.float32)
            for name, value in target.items():
                resolved[self.names.index(name)] = value
            attrs = torch.from_numpy(resolved[None].copy())
            style_planes = None
            if self.model.config.style_counts is not None:
                onehot = np.zeros((1, self.model.config.style_total), dtype=np.float32)
                offset = 0
                for name, count in zip(self.names, self.style_counts):
                    onehot[0, offset + styles.get(name, 0)] = 1.0
                    offset += count
                style_planes = torch.from_numpy(onehot)
            edited = self.model.edit(x, attrs, style_planes)
        array = to_image_array(edited)[0]
        u8 = np.clip((array + 1.0) * 127.5, 0, 255).round().astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
        latency_ms = (time.perf_counter() - start) * 1000.0
        vector = {name: float(v) for name, v in zip(self.names, resolved)}
        return buf.getvalue(), vector, latency_ms


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    header = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n".encode()
    message = BytesParser(policy=default_policy).parsebytes(header + body)
    if not message.is_multipart():
        raise ValidationError("body", "expected a multipart form")
    parts: dict[str, bytes] = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name:
            parts[name] = part.get_payload(decode=True) or b""
    return parts


def _extract_edit_request(handler: "EditRequestHandler",
                          body: bytes) -> tuple[bytes, dict, dict]:
    content_type = handler.headers.get("Content-Type", "")
    if content_type.startswith("multipart/form-data"):
        parts = _parse_multipart(content_type, body)
        if "image" not in parts:
            raise ValidationError("image", "missing multipart image part")
        target = json.loads(parts["target"].decode() or "{}") if "target" in parts else {}
        styles = json.loads(parts["styles"].decode() or "{}") if "styles" in parts else {}
        return parts["image"], target, styles
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ValidationError("body", f"invalid JSON ({err})")
    if not isinstance(payload, dict):
        raise ValidationError("body", "JSON body must be an object")
    if "image" not in payload or not isinstance(payload["image"], str):
        raise ValidationError("image", "missing base64 image field")
    try:
        image = base64.b64decode(payload["image"], validate=True)
    except binascii.Error as err:
        raise ValidationError("image", f"invalid base64 payload ({err})")
    return image, payload.get("target", {}), payload.get("styles", {})


class EditRequestHandler(BaseHTTPRequestHandler):
    service: EditService  # injected by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._send_cors_headers()
        self.end_headers()
        self.wfile.write(body)

    def _send_cors_headers(self):
        # the browser editor is served from a different origin
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def do_OPTIONS(self):
        self.send_response(204)
        self._send_cors_headers()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/health":
            self._send_json(
                200, {"status": "ok", "checkpoint_id": self.service.checkpoint_id}
            )
        elif self.path == "/attributes":
            self._send_json(200, self.service.attribute_schema())
        else:
            self._send_json(404, {"error": {"message": f"no route {self.path}"}})

    def do_POST(self):
        if self.path != "/edit":
            self._send_json(404, {"error": {"message": f"no route {self.path}"}})
            return
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length > MAX_BODY_BYTES:
            self.close_connection = True  # the body is never read
            self._send_json(
                413,
                {"error": {"message": f"payload exceeds {MAX_BODY_BYTES} bytes"}},
            )
            return
        body = self.rfile.read(length)
        try:
            image_bytes, target, styles = _extract_edit_request(self, body)
            target = self.service.validate_target(target)
            styles = self.service.validate_styles(styles)
            image = self.service.decode_image(image_bytes)
            png, vector, latency_ms = self.service.edit(image, target, styles)
        except ValidationError as err:
            self._send_json(
                400, {"error": {"field": err.field, "message": err.message}}
            )
            return
        except Exception:
            error_id = uuid.uuid4().hex[:12]
            self._send_json(500, {"error": {"id": error_id}})
            return
        self._send_json(
            200,
            {
                "image": base64.b64encode(png).decode("ascii"),
                "attributes": vector,
                "latency_ms": latency_ms,
            },
        )


def make_server(
    checkpoint_path: str | Path,
    host: str | None = None,
    port: int | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; flags beat env beat defaults."""
    host = host if host is not None else os.environ.get(HOST_ENV, "127.0.0.1")
    port = port if port is not None else int(os.environ.get(PORT_ENV, "8587"))
    service = EditService.from_checkpoint(checkpoint_path)
    handler = type("BoundHandler", (EditRequestHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve(checkpoint_path: str | Path, host: str | None = None,
          port: int | None = None) -> None:
    server = make_server(checkpoint_path, host, port)
    address = server.server_address
    print(f"serving on http://{address[0]}:{address[1]} "
          f"(checkpoint {Path(checkpoint_path).name})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
