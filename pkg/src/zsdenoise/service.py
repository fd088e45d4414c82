"""HTTP facade for the interactive denoising workflow.

One directory per session under the workdir persists the input, checkpoint,
base sigma maps, edit log, and training report; ready sessions are restored
bit-exactly on restart (the cached outputs are recomputed from the
checkpoint and maps, which is itself bit-deterministic).
"""

import io
import json
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image as PILImage

from . import metrics as MT
from . import model as M
from .imageio import RoiRect, crop_with, pad_to_multiple
from .losses import LossConfig
from .train import PAD_MODULUS, TrainConfig, train_single_image

MAX_UPLOAD_BYTES = 16 * 1024 * 1024


@dataclass
class Session:
    id: str
    state: str = "created"  # created|training|ready|failed
    config: dict = field(default_factory=dict)
    input: np.ndarray | None = None
    pad: object = None
    model: object = None
    base_maps: list = field(default_factory=list)
    edited_maps: list = field(default_factory=list)
    edits: list = field(default_factory=list)
    denoised: np.ndarray | None = None  # padded-space cache
    refiltered: np.ndarray | None = None
    progress_epoch: int = 0
    epochs: int = 500
    loss_tail: list = field(default_factory=list)
    error: str = ""
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _default_workers():
    return max(1, (os.cpu_count() or 1) // 2)


class SessionStore:
    def __init__(self, workdir, workers=None):
        self.workdir = workdir
        os.makedirs(workdir, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=workers or _default_workers())
        self._restore()

    # -- persistence -----------------------------------------------------
    def _dir(self, sid):
        return os.path.join(self.workdir, sid)

    def _persist_meta(self, s):
        doc = {
            "id": s.id,
            "state": s.state,
            "config": s.config,
            "edits": s.edits,
            "created_at": s.created_at,
            "updated_at": s.updated_at,
            "error": s.error,
        }
        with open(os.path.join(self._dir(s.id), "meta.json"), "w") as f:
            json.dump(doc, f)

    def _restore(self):
        for sid in sorted(os.listdir(self.workdir)):
            meta_path = os.path.join(self._dir(sid), "meta.json")
            if not os.path.isfile(meta_path):
                continue
            try:
                with open(meta_path) as f:
                    doc = json.load(f)
                raw = np.fromfile(os.path.join(self._dir(sid), "input.raw"), dtype="<f4")
                with open(os.path.join(self._dir(sid), "input.raw.json")) as f:
                    desc = json.load(f)
                img = raw.astype(np.float64).reshape(desc["height"], desc["width"])
                s = Session(id=sid, state=doc["state"], config=doc["config"])
                s.created_at = doc.get("created_at", time.time())
                s.input = img
                padded, pad = pad_to_multiple(img, PAD_MODULUS)
                s.pad = pad
                s.edits = doc.get("edits", [])
                if doc["state"] == "ready":
                    s.model = M.load_checkpoint(
                        os.path.join(self._dir(sid), "checkpoint.json")
                    )
                    s.base_maps = [
                        M.load_sigma_maps(
                            os.path.join(self._dir(sid), f"sigma_stage{i}.json")
                        )[0]
                        for i in range(s.model.meta.n_stages)
                    ]
                    s.denoised = M.refilter(padded, s.model, s.base_maps)
                    s.edited_maps = _replay_edits(s)
                    s.epochs = s.config.get("epochs", 500)
                    s.progress_epoch = s.epochs
                elif doc["state"] in ("created", "training"):
                    s.state = "failed"
                    s.error = "interrupted by restart"
                self.sessions[sid] = s
            except Exception:
                continue

    # -- lifecycle -------------------------------------------------------
    def create(self, img, config):
        sid = uuid.uuid4().hex[:12]
        s = Session(id=sid, config=config, input=img)
        padded, pad = pad_to_multiple(img, PAD_MODULUS)
        s.pad = pad
        s.epochs = config.get("epochs", 500)
        s.state = "training"
        d = self._dir(sid)
        os.makedirs(d, exist_ok=True)
        img.astype("<f4").tofile(os.path.join(d, "input.raw"))
        with open(os.path.join(d, "input.raw.json"), "w") as f:
            json.dump({"width": img.shape[1], "height": img.shape[0], "dtype": "f32"}, f)
        self._persist_meta(s)
        with self._lock:
            self.sessions[sid] = s
        self.executor.submit(self._train, s, padded)
        return s

    def _train(self, s, padded):
        try:
            cfg = s.config
            train_cfg = TrainConfig(
                epochs=int(cfg.get("epochs", 500)),
                learning_rate=float(cfg.get("lr", 1e-3)),
                seed=int(cfg.get("seed", 0)),
                els_mode=cfg.get("els", "els"),
            )
            loss_cfg = LossConfig(reg_weight=float(cfg.get("lambda", 350.0)))

            def on_epoch(epoch, loss):
                s.progress_epoch = epoch + 1
                s.loss_tail = (s.loss_tail + [loss])[-10:]

            model, report = train_single_image(
                padded, train_cfg, loss_cfg, n_stages=int(cfg.get("stages", 2)),
                on_epoch=on_epoch,
            )
            out, maps = M.denoise(padded, model)
            with s.lock:
                s.model = model
                s.base_maps = maps
                s.edited_maps = [m.copy() for m in maps]
                s.denoised = out
                s.refiltered = None
                s.state = "ready"
                s.updated_at = time.time()
            d = self._dir(s.id)
            M.save_checkpoint(model, os.path.join(d, "checkpoint.json"))
            for i, m in enumerate(maps):
                M.save_sigma_maps(m, i, d)
            with open(os.path.join(d, "report.json"), "w") as f:
                json.dump(report.to_dict(config=cfg), f)
            self._persist_meta(s)
        except Exception as e:
            with s.lock:
                s.state = "failed"
                s.error = str(e)
                s.updated_at = time.time()
            self._persist_meta(s)

    def get(self, sid):
        with self._lock:
            return self.sessions.get(sid)


def _replay_edits(s):
    maps = [m.copy() for m in s.base_maps]
    for e in s.edits:
        edit = _parse_edit(e)
        maps[edit.stage] = M.apply_sigma_edit(maps[edit.stage], edit, s.model.meta.patch_size)
    return maps


def _parse_edit(e):
    region = e.get("region")
    if not isinstance(region, (list, tuple)) or len(region) != 4:
        raise ValueError("edit region must be [x0, y0, x1, y1]")
    edit = M.SigmaEdit(
        stage=int(e.get("stage", 0)),
        region=RoiRect(*[int(v) for v in region]),
        multiplier_r=float(e.get("multiplier_r", 1.0)),
        multiplier_x=float(e.get("multiplier_x", 1.0)),
        multiplier_y=float(e.get("multiplier_y", 1.0)),
        clamp_max=e.get("clamp_max", {}) or {},
    )
    edit.validate()
    return edit


def _png16_bytes(img):
    arr = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(np.uint16)
    buf = io.BytesIO()
    PILImage.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _decode_upload(data):
    try:
        pil = PILImage.open(io.BytesIO(data))
        arr = np.asarray(pil)
    except Exception as e:
        raise ValueError(f"undecodable image: {e}") from e
    if arr.ndim == 3:
        arr = arr[..., 0]
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype in (np.uint16, np.int32):
        return arr.astype(np.float64) / 65535.0
    raise ValueError(f"unsupported image dtype {arr.dtype}")


def _parse_roi_query(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("ROI must be x0,y0,x1,y1")
    return RoiRect(*parts)


def create_app(workdir, workers=None):
    store = SessionStore(workdir, workers)
    app = FastAPI(title="zsdenoise service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    def _err(status, message):
        return JSONResponse({"error": message}, status_code=status)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=202)
    async def create_session(request: Request):
        form = await request.form()
        upload = form.get("image")
        if upload is None:
            return _err(400, "missing 'image' file field")
        data = await upload.read()
        if len(data) > MAX_UPLOAD_BYTES:
            return _err(413, "upload too large")
        config = {}
        if form.get("config"):
            try:
                config = json.loads(form.get("config"))
            except json.JSONDecodeError:
                return _err(400, "config field is not valid JSON")
        try:
            img = _decode_upload(data)
        except ValueError as e:
            return _err(400, str(e))
        s = store.create(img, config)
        return {"id": s.id, "state": s.state}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        return {
            "id": s.id,
            "state": s.state,
            "progress": {"epoch": s.progress_epoch, "epochs": s.epochs},
            "loss_tail": s.loss_tail,
            "error": s.error,
        }

    @app.get("/sessions/{sid}/result")
    def get_result(sid: str, variant: str = "denoised"):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        if s.state != "ready":
            return _err(409, f"session is {s.state}, not ready")
        if variant not in ("denoised", "refiltered"):
            return _err(422, "variant must be denoised or refiltered")
        with s.lock:
            img = _variant_image(s, variant)
            out = crop_with(img, s.pad)
        return Response(
            content=_png16_bytes(out),
            media_type="image/png",
            headers={
                "X-Width": str(out.shape[1]),
                "X-Height": str(out.shape[0]),
                "X-Variant": variant,
            },
        )

    @app.get("/sessions/{sid}/sigma/{stage}")
    def get_sigma(sid: str, stage: int):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        if s.state != "ready":
            return _err(409, f"session is {s.state}, not ready")
        if not 0 <= stage < len(s.base_maps):
            return _err(404, "stage out of range")
        with s.lock:
            base, edited = s.base_maps[stage], s.edited_maps[stage]
            gh, gw = base.grid
            return {
                "stage": stage,
                "grid": [gh, gw],
                "patch_size": s.model.meta.patch_size,
                "sigma_r": base.sigma_r.ravel().tolist(),
                "sigma_x": base.sigma_x.ravel().tolist(),
                "sigma_y": base.sigma_y.ravel().tolist(),
                "edited": {
                    "sigma_r": edited.sigma_r.ravel().tolist(),
                    "sigma_x": edited.sigma_x.ravel().tolist(),
                    "sigma_y": edited.sigma_y.ravel().tolist(),
                },
            }

    @app.patch("/sessions/{sid}/sigma")
    async def patch_sigma(sid: str, request: Request):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        if s.state != "ready":
            return _err(409, f"session is {s.state}, not ready")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _err(422, "body must be JSON")
        with s.lock:
            if isinstance(body, dict) and body.get("reset"):
                s.edits = []
                s.edited_maps = [m.copy() for m in s.base_maps]
                s.refiltered = None
                s.updated_at = time.time()
                store._persist_meta(s)
                return {"applied_edit_count": 0}
            if not isinstance(body, list):
                return _err(422, "body must be a JSON list of edits or {'reset': true}")
            try:
                parsed = [_parse_edit(e) for e in body]
                for e, edit in zip(body, parsed):
                    s.edited_maps[edit.stage] = M.apply_sigma_edit(
                        s.edited_maps[edit.stage], edit, s.model.meta.patch_size
                    )
                    s.edits.append(e)
            except (ValueError, IndexError) as e:
                return _err(422, str(e))
            s.refiltered = None
            s.updated_at = time.time()
            store._persist_meta(s)
            return {"applied_edit_count": len(parsed)}

    @app.post("/sessions/{sid}/refilter")
    def refilter_session(sid: str):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        if s.state != "ready":
            return _err(409, f"session is {s.state}, not ready")
        with s.lock:
            padded, _ = pad_to_multiple(s.input, PAD_MODULUS)
            s.refiltered = M.refilter(padded, s.model, s.edited_maps)
            s.updated_at = time.time()
        return {"status": "ok"}

    @app.get("/sessions/{sid}/metrics")
    def session_metrics(sid: str, roiSignal: str = "", roiBg: str = ""):
        s = store.get(sid)
        if s is None:
            return _err(404, "unknown session")
        if s.state != "ready":
            return _err(409, f"session is {s.state}, not ready")
        try:
            roi_s = _parse_roi_query(roiSignal)
            roi_b = _parse_roi_query(roiBg)
            with s.lock:
                den = crop_with(_variant_image(s, "denoised"), s.pad)
                ref = crop_with(_variant_image(s, "refiltered"), s.pad)
                return {
                    "cnr_input": MT.cnr(s.input, roi_s, roi_b),
                    "cnr_denoised": MT.cnr(den, roi_s, roi_b),
                    "cnr_refiltered": MT.cnr(ref, roi_s, roi_b),
                }
        except ValueError as e:
            return _err(422, str(e))

    return app


def _variant_image(s, variant):
    if variant == "denoised":
        return s.denoised
    if s.refiltered is None:
        padded, _ = pad_to_multiple(s.input, PAD_MODULUS)
        s.refiltered = M.refilter(padded, s.model, s.edited_maps)
    return s.refiltered
