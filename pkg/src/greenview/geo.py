"""Street-network point sampling, street-level imagery acquisition, GeoJSON export.

Distances use spherical haversine (radius 6,371,008.8 m); sub-meter model
error is irrelevant at sampling intervals of tens of meters. Networks arrive
as GeoJSON LineString/MultiLineString features; imagery comes from a Street
View-compatible HTTP endpoint with on-disk caching and token-bucket rate
limiting.
"""

from __future__ import annotations

import json
import math
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    EmptyNetwork,
    NoImageryAtPoint,
    NotEnoughPoints,
    QuotaExceeded,
    TransportError,
    UnreadableFile,
)
from .gvi import GviMeasurement
from .imaging import RasterImage, decode_image

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_HEADINGS = (0.0, 60.0, 120.0, 180.0, 240.0, 300.0)
API_KEY_ENV = "GREENVIEW_API_KEY"


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    s = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(s))


@dataclass(frozen=True)
class StreetSegment:
    id: str
    vertices: tuple[tuple[float, float], ...]  # (lat, lon) WGS84

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError(f"segment {self.id}: needs >= 2 vertices")
        for lat, lon in self.vertices:
            if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
                raise ValueError(f"segment {self.id}: coordinate out of range ({lat}, {lon})")

    def length_m(self) -> float:
        return math.fsum(
            haversine_m(self.vertices[i], self.vertices[i + 1])
            for i in range(len(self.vertices) - 1)
        )


@dataclass(frozen=True)
class StreetNetwork:
    segments: tuple[StreetSegment, ...]


@dataclass(frozen=True)
class SamplePoint:
    point_id: str
    location: tuple[float, float]
    segment_id: str
    requested_headings: tuple[float, ...] = DEFAULT_HEADINGS

    def __post_init__(self):
        for h in self.requested_headings:
            if not 0.0 <= h < 360.0:
                raise ValueError(f"heading out of [0, 360): {h}")


def load_street_network(path) -> StreetNetwork:
    """Read LineString/MultiLineString features from a GeoJSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    features = doc.get("features", [doc]) if isinstance(doc, dict) else []
    segments = []
    for i, feat in enumerate(features):
        geom = feat.get("geometry", feat)
        gtype = geom.get("type")
        props = feat.get("properties") or {}
        base_id = str(props.get("id", props.get("segment_id", f"seg{i:04d}")))
        if gtype == "LineString":
            lines = [geom["coordinates"]]
        elif gtype == "MultiLineString":
            lines = geom["coordinates"]
        else:
            continue
        for j, line in enumerate(lines):
            seg_id = base_id if len(lines) == 1 else f"{base_id}.{j}"
            vertices = tuple((float(lat), float(lon)) for lon, lat in line)
            segments.append(StreetSegment(id=seg_id, vertices=vertices))
    return StreetNetwork(segments=tuple(segments))


def _interpolate(segment: StreetSegment, cumulative: list[float], target_m: float) -> tuple[float, float]:
    if target_m <= 0:
        return segment.vertices[0]
    if target_m >= cumulative[-1]:
        return segment.vertices[-1]
    # last vertex index with cumulative length <= target
    lo, hi = 0, len(cumulative) - 1
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if cumulative[mid] <= target_m:
            lo = mid
        else:
            hi = mid
    edge_len = cumulative[lo + 1] - cumulative[lo]
    frac = 0.0 if edge_len == 0 else (target_m - cumulative[lo]) / edge_len
    (lat1, lon1), (lat2, lon2) = segment.vertices[lo], segment.vertices[lo + 1]
    return (lat1 + frac * (lat2 - lat1), lon1 + frac * (lon2 - lon1))


def sample_points(
    network: StreetNetwork,
    interval_m: float,
    seed: int = 0,
    headings: tuple[float, ...] = DEFAULT_HEADINGS,
    jitter_m: float = 0.0,
) -> list[SamplePoint]:
    """Place points every interval_m of arc length along each segment.

    The first point sits interval_m/2 from the segment start; segments
    shorter than interval_m/2 yield no points. The seed only drives the
    optional along-segment jitter (off by default).
    """
    if interval_m <= 0:
        raise ValueError("interval_m must be positive")
    if not network.segments:
        raise EmptyNetwork("network has no segments")
    rng = random.Random(seed)
    points = []
    for seg in network.segments:
        cumulative = [0.0]
        for i in range(len(seg.vertices) - 1):
            cumulative.append(cumulative[-1] + haversine_m(seg.vertices[i], seg.vertices[i + 1]))
        length = cumulative[-1]
        if length < interval_m / 2:
            continue
        count = int((length - interval_m / 2) // interval_m) + 1
        for k in range(count):
            target = interval_m / 2 + k * interval_m
            if jitter_m > 0:
                target = min(max(target + rng.uniform(-jitter_m, jitter_m), 0.0), length)
            points.append(
                SamplePoint(
                    point_id=f"{seg.id}_{k:04d}",
                    location=_interpolate(seg, cumulative, target),
                    segment_id=seg.id,
                    requested_headings=tuple(headings),
                )
            )
    return points


def random_subsample(points: list[SamplePoint], k: int, seed: int) -> list[SamplePoint]:
    """Uniform sample without replacement, deterministic per seed."""
    if k > len(points):
        raise NotEnoughPoints(f"requested {k} of {len(points)} points")
    return random.Random(seed).sample(points, k)


class _TokenBucket:
    def __init__(self, rate_per_s: float):
        self.rate = rate_per_s
        self.capacity = max(1.0, rate_per_s)
        self.tokens = self.capacity
        self.stamp = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class StreetViewClient:
    """HTTP client for a Street View-compatible static-image endpoint.

    Requests carry ``location=<lat>,<lon>&heading=<h>&pitch=<p>&size=<WxH>&key=...``.
    Responses are cached on disk keyed by (point_id, heading); cache hits
    never touch the network. Transport failures retry with exponential
    backoff (3 attempts, base 500 ms).
    """

    def __init__(
        self,
        endpoint: str,
        cache_dir,
        api_key: str | None = None,
        requests_per_second: float = 10.0,
        image_size: tuple[int, int] = (640, 640),
        pitch: float = 0.0,
        max_attempts: int = 3,
        backoff_base_s: float = 0.5,
        timeout_s: float = 30.0,
    ):
        self.endpoint = endpoint
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.image_size = image_size
        self.pitch = pitch
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.timeout_s = timeout_s
        self.session = requests.Session()
        self.bucket = _TokenBucket(requests_per_second)

    def _cache_path(self, point_id: str, heading: float) -> Path:
        return self.cache_dir / f"{point_id}_h{heading:g}.img"

    def _get_with_retry(self, params: dict) -> bytes:
        delay = self.backoff_base_s
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(delay)
                delay *= 2
            self.bucket.acquire()
            try:
                resp = self.session.get(self.endpoint, params=params, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last = TransportError(f"{self.endpoint}: {exc}")
                continue
            if resp.status_code == 200:
                return resp.content
            if resp.status_code == 404:
                raise NoImageryAtPoint(f"no imagery for location {params.get('location')}")
            if resp.status_code == 429:
                raise QuotaExceeded(f"{self.endpoint} returned 429")
            last = TransportError(f"{self.endpoint} returned {resp.status_code}")
        raise last if last is not None else TransportError(self.endpoint)

    def fetch(self, point: SamplePoint, heading: float) -> RasterImage:
        cache_path = self._cache_path(point.point_id, heading)
        image_id = f"{point.point_id}_h{heading:g}"
        if not cache_path.is_file():
            lat, lon = point.location
            params = {
                "location": f"{lat},{lon}",
                "heading": f"{heading:g}",
                "pitch": f"{self.pitch:g}",
                "size": f"{self.image_size[0]}x{self.image_size[1]}",
                "key": self.api_key,
            }
            body = self._get_with_retry(params)
            tmp = cache_path.with_suffix(".tmp")
            tmp.write_bytes(body)
            os.replace(tmp, cache_path)
        decoded = decode_image(cache_path, id=image_id)
        return RasterImage(
            id=image_id,
            pixels=decoded.pixels,
            location=point.location,
            pose=(heading, self.pitch),
        )


def fetch_street_imagery(
    client: StreetViewClient,
    point: SamplePoint,
    headings: tuple[float, ...] | None = None,
) -> list[RasterImage]:
    """One image per heading (default: the point's requested headings)."""
    use = point.requested_headings if headings is None else tuple(headings)
    return [client.fetch(point, h) for h in use]


def export_geojson(results: list[tuple[SamplePoint, GviMeasurement]], path) -> None:
    """Write per-point GVI as a GeoJSON FeatureCollection of Point features."""
    features = []
    for point, gvi in results:
        lat, lon = point.location
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "point_id": point.point_id,
                    "gvi": gvi.value,
                    "n_images": gvi.n_images,
                    "source": gvi.source,
                },
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
