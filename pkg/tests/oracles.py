"""Brute-force recomputation of tool outputs from raw clip documents.

These work on plain JSON dicts and share no code with the package, so they
check the loader and the executors together.
"""

TAU = 1.15


def area(bbox):
    return bbox[2] * bbox[3]


def density(doc, fid):
    total = 0.0
    for veh in doc["frames"][fid]["vehicles"]:
        total += area(veh["bbox"])
    value = total / doc["road_area_px"]
    if value > 1:
        value = 1.0
    return round(value, 2)


def flow(doc, fids):
    seen = []
    for fid in fids:
        for veh in doc["frames"][fid]["vehicles"]:
            if veh["track_id"] not in seen:
                seen.append(veh["track_id"])
    return len(seen)


def moving(a, b, tau=TAU):
    big, small = (a, b) if a >= b else (b, a)
    return big / small > tau


def motion_summary(doc, fids, tau=TAU):
    """track id -> 'moving' / 'not moving' from the first and last frame."""
    fids = sorted(set(fids))
    first, last = fids[0], fids[-1]
    tracks = set()
    for fid in fids:
        for veh in doc["frames"][fid]["vehicles"]:
            tracks.add(veh["track_id"])
    out = {}
    for track in tracks:
        a = [area(v["bbox"]) for v in doc["frames"][first]["vehicles"] if v["track_id"] == track]
        b = [area(v["bbox"]) for v in doc["frames"][last]["vehicles"] if v["track_id"] == track]
        if not a or not b:
            out[track] = "moving"
        else:
            out[track] = "moving" if moving(a[0], b[0], tau) else "not moving"
    return out


def vehicles(doc, fid):
    return [(v["color"], v["vtype"]) for v in doc["frames"][fid]["vehicles"]]


def plates(doc, fid):
    return [list(p) for p in doc["frames"][fid]["plates"]]


def signs(doc, fid):
    return sorted(((s["confidence"], s["name"]) for s in doc["frames"][fid]["signs"]), key=lambda p: -p[0])


def objects(doc, fid):
    return sorted(((o["confidence"], o["label"]) for o in doc["frames"][fid]["objects"]), key=lambda p: -p[0])


def lanes(doc, fids):
    out = []
    for fid in fids:
        count = doc["frames"][fid]["lane_count"]
        if count not in out:
            out.append(count)
    return out
