"""Command line entry point.

Exit codes: 0 success, 1 runtime error, 2 usage error.  Traces and tables go
to stdout, diagnostics to stderr.
"""

import argparse
import json
import logging
import signal
import sys
import threading

import numpy as np

from . import synth
from .errors import FaceVitalsError
from .facegate import GateConfig, make_detector
from .fer.evaluate import ConstantClassifier, OracleClassifier, evaluate
from .fer.ferw import read_model, save_model
from .fer.model import classify, reference_model, zero_head
from .frame import Roi, crop, resize_bilinear, to_grayscale
from .pulse import CONFIDENCE_THRESHOLD, PulseConfig, PulseSession
from .rvid import RvidReader, write_rvid
from .temporal import DEFAULT_ATTENUATION, BandConfig, magnify_frames

log = logging.getLogger("facevitals")


class UsageError(Exception):
    pass


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 320x240, got {text!r}") from None
    return w, h


def _roi(text):
    try:
        return Roi.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rgb(text):
    parts = tuple(int(v) for v in text.split(","))
    if len(parts) != 3 or not all(0 <= v <= 255 for v in parts):
        raise argparse.ArgumentTypeError(f"color must be R,G,B in 0..255, got {text!r}")
    return parts


def _band(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like 0.4:4.0, got {text!r}") from None
    return lo, hi


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _emit(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj, separators=(",", ":")) + "\n")


# --- synth -----------------------------------------------------------------

def cmd_synth(args):
    width, height = args.size
    common = dict(fps=args.fps, duration=args.duration, width=width, height=height,
                  noise_sigma=args.noise, seed=args.seed, skin_base=args.skin,
                  background=args.background)
    try:
        if args.distance_ratio is not None:
            scene = synth.distance_scene(
                args.distance_ratio, face_bpm=args.bpm, bg_flicker_bpm=args.bg_flicker_bpm,
                face_amplitude=args.amplitude, bg_amplitude=args.bg_amplitude,
                analysis_roi=args.roi, **common)
        else:
            face = args.face or synth.centered_roi(width, height, width * 100 // 320,
                                                  height * 120 // 240)
            scene = synth.PulseScene(face_rect=face, pulse_bpm=args.bpm,
                                     pulse_amplitude=args.amplitude,
                                     bg_flicker_bpm=args.bg_flicker_bpm,
                                     bg_flicker_amplitude=args.bg_amplitude,
                                     analysis_roi=args.roi, **common)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = write_rvid(args.output, synth.generate_pulse_video(scene), scene.fps)
    print(json.dumps({"frames": n, "width": width, "height": height, "fps": scene.fps,
                      "face_rect": list(scene.face_rect), "roi": list(scene.roi)}),
          file=sys.stderr)
    return 0


# --- analyze ---------------------------------------------------------------

def _analyze_config(args):
    return {
        "band": f"{args.band[0]}:{args.band[1]}",
        "alpha": args.alpha,
        "levels": args.levels,
        "analysis_level": args.analysis_level,
        "iou": args.iou,
        "roi": None if args.roi is None else str(args.roi),
        "detector": args.detector,
        "channel": args.channel,
        "calibration": args.calibration,
        "window": args.window,
        "smoothing": args.smoothing,
        "min_fps": args.min_fps,
        "confidence": args.confidence,
        "report_every": args.report_every,
        "model": args.model,
        "fer_every": args.fer_every,
    }


def _config_argv(config):
    """Flags that reproduce ``config`` when passed back to ``analyze``."""
    argv = []
    for key, value in config.items():
        if value is None:
            continue
        argv += ["--" + key.replace("_", "-"), str(value)]
    return argv


def cmd_analyze(args):
    try:
        band = BandConfig(args.band[0], args.band[1], alpha=args.alpha)
        cfg = PulseConfig(band=band, calibration_seconds=args.calibration,
                          window_seconds=args.window, min_fps=args.min_fps,
                          smoothing_factor=args.smoothing, pyramid_levels=args.levels,
                          analysis_level=args.analysis_level, channel=args.channel,
                          confidence_threshold=args.confidence)
        if args.detector != "none" and args.roi is None:
            raise ValueError("--detector needs --roi (the analysis region to gate on)")
        gate_cfg = GateConfig(args.roi, args.iou) if args.detector != "none" else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = read_model(args.model) if args.model else None
    config = _analyze_config(args)
    records = []
    with RvidReader(args.input) as reader:
        h = reader.header
        _emit({"type": "header", "config": config, "argv": _config_argv(config),
               "input": {"path": args.input, "width": h.width, "height": h.height,
                         "fps": h.fps}})
        session = PulseSession(cfg, roi=args.roi, gate_config=gate_cfg,
                               detector=make_detector(args.detector, args.roi))
        next_report = None
        for frame in reader:
            gated_before = session.frames_gated_out
            reading = session.push_frame(frame)
            gated = session.frames_gated_out > gated_before
            emotion = None
            if model is not None and session.frames_seen % args.fer_every == 0:
                region = (session.last_detection.roi if session.last_detection
                          else args.roi or Roi(0, 0, frame.width, frame.height))
                dist = classify(model, resize_bilinear(crop(to_grayscale(frame), region), 48, 48))
                emotion = {"label": dist.label, "probability": float(dist.probabilities[dist.argmax])}
            t = frame.timestamp_ms
            if args.report_every and next_report is not None and t < next_report:
                continue
            if args.report_every:
                next_report = t + args.report_every * 1000.0
            rec = {
                "type": "reading",
                "t_ms": t,
                "bpm": None if gated or reading is None else reading.bpm,
                "confidence": 0.0 if gated or reading is None else reading.confidence,
                "calibrating": True if reading is None else reading.calibrating,
                "gated": gated,
                "emotion": emotion,
            }
            records.append(rec)
            _emit(rec)
    bpms = [r["bpm"] for r in records if r["bpm"] is not None and not r["calibrating"]]
    _emit({
        "type": "summary",
        "mean_bpm": float(np.mean(bpms)) if bpms else None,
        "readings": len(bpms),
        "gated": session.frames_gated_out,
        "frames": session.frames_seen,
    })
    if args.figure:
        from .plotting import plot_bpm_trace
        plot_bpm_trace(records, args.figure, title=args.input)
    return 0


# --- amplify ---------------------------------------------------------------

def cmd_amplify(args):
    try:
        cfg = BandConfig(args.band[0], args.band[1], alpha=args.alpha,
                         level_attenuation=args.attenuation)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(cfg.level_attenuation) < args.levels + 1:
        raise UsageError(f"--attenuation needs {args.levels + 1} values (bands plus residual)")
    with RvidReader(args.input) as reader:
        header = reader.header
        frames = list(reader)
    if not frames:
        raise FaceVitalsError("input has no frames")
    video = np.stack([f.pixels for f in frames])
    out = magnify_frames(video, header.fps, cfg, levels=args.levels, channels=args.channels)
    from .frame import Frame
    write_rvid(args.output,
               (Frame.from_array(out[i], f.timestamp_ms) for i, f in enumerate(frames)),
               header.fps)
    return 0


# --- serve -----------------------------------------------------------------

def cmd_serve(args):
    from .service import StreamService
    from .service.http import ServiceHTTPServer

    model = read_model(args.model) if args.model else None
    service = StreamService(model=model, max_sessions=args.max_sessions,
                            queue_capacity=args.queue_capacity,
                            default_options={"fer_every": args.fer_every})
    try:
        server = ServiceHTTPServer((args.host, args.port), service)
    except OSError as exc:
        raise FaceVitalsError(f"cannot bind {args.host}:{args.port}: {exc}") from None
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, on_signal)
    signal.signal(signal.SIGINT, on_signal)
    service.start(args.workers)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port}", file=sys.stderr, flush=True)
    while not stop.wait(0.2):
        pass
    server.shutdown()
    server.server_close()
    service.stop()
    print("shut down", file=sys.stderr, flush=True)
    return 0


# --- fer -------------------------------------------------------------------

def _load_face(path, roi=None):
    if path.endswith(".npy"):
        plane = np.load(path).astype(np.float64)
        if plane.ndim == 3:
            plane = to_grayscale(np.clip(plane, 0, 255).astype(np.uint8))
    else:
        with RvidReader(path) as reader:
            frame = next(iter(reader), None)
        if frame is None:
            raise FaceVitalsError(f"{path} has no frames")
        plane = to_grayscale(frame)
    if roi is not None:
        plane = crop(plane, roi)
    if plane.shape != (48, 48):
        plane = resize_bilinear(plane, 48, 48)
    return plane


def cmd_fer_gen_weights(args):
    model = reference_model(args.seed)
    if args.zero_head:
        model = zero_head(model)
    n = save_model(model, args.output)
    print(json.dumps({"bytes": n, "seed": args.seed}), file=sys.stderr)
    return 0


def cmd_fer_classify(args):
    model = read_model(args.model)
    dist = classify(model, _load_face(args.input, args.roi))
    _emit({"probabilities": dist.as_dict(), "label": dist.label, "index": dist.argmax})
    return 0


def cmd_fer_eval(args):
    dataset = synth.generate_face_set(args.count, args.seed)
    if args.oracle:
        classifier = OracleClassifier(dataset)
    elif args.constant is not None:
        classifier = ConstantClassifier(args.constant)
    elif args.model:
        classifier = read_model(args.model)
    else:
        raise UsageError("fer eval needs --model, --oracle or --constant")
    cm, acc = evaluate(classifier, dataset)
    print(cm.format())
    print(f"accuracy {acc:.6f}")
    if args.figure:
        from .plotting import plot_confusion
        plot_confusion(cm, args.figure)
    return 0


# --- parser ----------------------------------------------------------------

def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="facevitals", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic pulse video (RVID)")
    s.add_argument("--bpm", type=float, default=72.0)
    s.add_argument("--fps", type=_positive(float), default=20.0)
    s.add_argument("--duration", type=_positive(float), default=15.0)
    s.add_argument("--size", type=_size, default=(320, 240))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=1.0, help="pulse amplitude on green, gray levels")
    s.add_argument("--noise", type=float, default=2.0, help="per-pixel noise sigma")
    s.add_argument("--face", type=_roi, help="face rect x,y,w,h (default: centered)")
    s.add_argument("--roi", type=_roi, help="analysis region recorded with the scene")
    s.add_argument("--skin", type=_rgb, default=(180, 120, 100))
    s.add_argument("--background", type=_rgb, default=(70, 80, 90))
    s.add_argument("--bg-flicker-bpm", type=float)
    s.add_argument("--bg-amplitude", type=float, default=0.0)
    s.add_argument("--distance-ratio", type=float,
                   help="size the face to this fraction of the analysis region")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("analyze", help="estimate heart rate from an RVID file")
    a.add_argument("input")
    a.add_argument("--band", type=_band, default=(0.4, 4.0))
    a.add_argument("--alpha", type=float, default=50.0)
    a.add_argument("--levels", type=int, default=3)
    a.add_argument("--analysis-level", type=int, default=1)
    a.add_argument("--iou", type=float, default=0.5)
    a.add_argument("--roi", type=_roi)
    a.add_argument("--detector", choices=("none", "static", "motion"), default="none")
    a.add_argument("--channel", choices=("R", "G", "B"), default="G")
    a.add_argument("--calibration", type=float, default=5.0)
    a.add_argument("--window", type=float, default=10.0)
    a.add_argument("--smoothing", type=float, default=0.3)
    a.add_argument("--min-fps", type=float, default=15.0)
    a.add_argument("--confidence", type=float, default=CONFIDENCE_THRESHOLD)
    a.add_argument("--report-every", type=float, default=0.0,
                   help="seconds between trace records (0: every frame)")
    a.add_argument("--model", help="FERW file for expression classification")
    a.add_argument("--fer-every", type=_positive(int), default=10)
    a.add_argument("--figure", help="write a BPM/confidence plot to this path")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("amplify", help="Eulerian color magnification of an RVID file")
    m.add_argument("input")
    m.add_argument("output")
    m.add_argument("--band", type=_band, default=(0.4, 4.0))
    m.add_argument("--alpha", type=float, default=50.0)
    m.add_argument("--levels", type=int, default=3)
    m.add_argument("--attenuation", type=_floats, default=DEFAULT_ATTENUATION,
                   help="per-level gain multipliers, finest first, residual last")
    m.add_argument("--channels", default="RGB")
    m.set_defaults(func=cmd_amplify)

    v = sub.add_parser("serve", help="run the frame-batch HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8080)
    v.add_argument("--model", help="FERW file; emotions are omitted without one")
    v.add_argument("--max-sessions", type=_positive(int), default=64)
    v.add_argument("--queue-capacity", type=_positive(int), default=8)
    v.add_argument("--workers", type=_positive(int), default=1)
    v.add_argument("--fer-every", type=_positive(int), default=10)
    v.set_defaults(func=cmd_serve)

    f = sub.add_parser("fer", help="expression classifier tools")
    fsub = f.add_subparsers(dest="fer_command", required=True)
    g = fsub.add_parser("gen-weights", help="write seeded random weights for the reference network")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--zero-head", action="store_true", help="zero the final conv (uniform output)")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_fer_gen_weights)
    c = fsub.add_parser("classify", help="classify one face (.npy plane or first RVID frame)")
    c.add_argument("--model", required=True)
    c.add_argument("input")
    c.add_argument("--roi", type=_roi)
    c.set_defaults(func=cmd_fer_classify)
    e = fsub.add_parser("eval", help="confusion matrix on the synthetic face set")
    src = e.add_mutually_exclusive_group()
    src.add_argument("--model")
    src.add_argument("--oracle", action="store_true", help="stub that always predicts the truth")
    src.add_argument("--constant", type=int, choices=range(7), help="stub predicting one class")
    e.add_argument("--count", type=int, default=700)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--figure", help="write a confusion-matrix plot to this path")
    e.set_defaults(func=cmd_fer_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (FaceVitalsError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
