"""Polygon frame annotations, XML persistence, and ROI labeling geometry."""

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum

from .imaging import Rect

COORD_DECIMALS = 6


class AnnotationError(ValueError):
    """Annotation document violates the schema."""


class MissingRoadPolygon(ValueError):
    """ROI labeling asked of a frame without a road polygon."""


class ObjectClass(Enum):
    ROAD = "road"
    LANE_MARKER = "lane_marker"
    PEDESTRIAN = "pedestrian"
    CAR = "car"


class RoiRelation(Enum):
    OUTSIDE = "outside"
    PARTIAL = "partial"
    INSIDE = "inside"


class Provenance(Enum):
    PURE_ROAD = "pure_road"
    OFF_ROAD = "off_road"
    MIXED_BOUNDARY = "mixed_boundary"
    CAR_OVERLAP = "car_overlap"


@dataclass(frozen=True)
class RoiLabel:
    """Class assignment for one ROI; positive means road area."""

    provenance: Provenance

    @property
    def positive(self) -> bool:
        return self.provenance is Provenance.PURE_ROAD

    @property
    def sign(self) -> int:
        return 1 if self.positive else -1


@dataclass(frozen=True)
class Polygon:
    """Implicitly closed polygon; vertices in pixel coordinates."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)

    def edges(self):
        v = self.vertices
        return tuple((v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


@dataclass(frozen=True)
class FrameAnnotation:
    """Labeled polygons of one frame, tied to its image file."""

    frame_id: str
    image_ref: str
    width: int
    height: int
    objects: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")
        roads = sum(1 for cls, _ in self.objects if cls is ObjectClass.ROAD)
        if roads > 1:
            raise ValueError(
                f"frame {self.frame_id!r} has {roads} road polygons, max is 1"
            )
        for cls, poly in self.objects:
            for x, y in poly.vertices:
                if not (0 <= x <= self.width and 0 <= y <= self.height):
                    raise ValueError(
                        f"vertex ({x}, {y}) outside frame "
                        f"{self.width}x{self.height}"
                    )

    @property
    def road_polygon(self):
        for cls, poly in self.objects:
            if cls is ObjectClass.ROAD:
                return poly
        return None

    def polygons(self, cls: ObjectClass):
        return tuple(p for c, p in self.objects if c is cls)


# ---------------------------------------------------------------------------
# geometry primitives

def _orient(a, b, c) -> float:
    """Twice the signed area of triangle abc."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(p, a, b) -> bool:
    """True when p lies on the closed segment ab."""
    if _orient(a, b, p) != 0.0:
        return False
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper crossing: the open segments intersect in a single point."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and all(
        d != 0.0 for d in (d1, d2, d3, d4)
    )


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Closed segment intersection, touching included."""
    if _segments_cross(p1, p2, p3, p4):
        return True
    return (
        _on_segment(p3, p1, p2)
        or _on_segment(p4, p1, p2)
        or _on_segment(p1, p3, p4)
        or _on_segment(p2, p3, p4)
    )


def point_on_polygon_boundary(point, polygon: Polygon) -> bool:
    return any(_on_segment(point, a, b) for a, b in polygon.edges())


def point_in_polygon(point, polygon: Polygon) -> bool:
    """Even-odd containment test; boundary points count as inside."""
    x, y = float(point[0]), float(point[1])
    inside = False
    for (x1, y1), (x2, y2) in polygon.edges():
        if _on_segment((x, y), (x1, y1), (x2, y2)):
            return True
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xi:
                inside = not inside
    return inside


def polygon_is_simple(polygon: Polygon) -> bool:
    """No repeated vertices, no degenerate spikes, no edge crossings."""
    verts = polygon.vertices
    n = len(verts)
    for i in range(n):
        if verts[i] == verts[(i + 1) % n]:
            return False
    edges = polygon.edges()
    for i in range(n):
        a1, a2 = edges[i]
        for j in range(i + 1, n):
            b1, b2 = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                shared = a2 if j == i + 1 else a1
                far_a = a1 if shared == a2 else a2
                far_b = b2 if shared == b1 else b1
                # spike: neighbours fold back onto each other
                if _orient(shared, far_a, far_b) == 0.0 and (
                    (far_a[0] - shared[0]) * (far_b[0] - shared[0])
                    + (far_a[1] - shared[1]) * (far_b[1] - shared[1])
                ) > 0:
                    return False
            elif _segments_intersect(a1, a2, b1, b2):
                return False
    return True


def rect_polygon_relation(roi: Rect, polygon: Polygon) -> RoiRelation:
    """Containment trichotomy of an ROI against a polygon.

    Inside means the whole ROI lies in the closed polygon region, Outside
    means they share no point, Partial covers everything else. An ROI corner
    sitting exactly on the polygon boundary counts as inside.
    """
    corners = roi.corners()
    corner_in = [point_in_polygon(c, polygon) for c in corners]

    x0, y0 = float(roi.x), float(roi.y)
    x1, y1 = float(roi.x + roi.w), float(roi.y + roi.h)
    vertex_in_closed = any(
        x0 <= vx <= x1 and y0 <= vy <= y1 for vx, vy in polygon.vertices
    )
    vertex_in_open = any(
        x0 < vx < x1 and y0 < vy < y1 for vx, vy in polygon.vertices
    )

    roi_edges = roi.edges()
    poly_edges = polygon.edges()
    touches = any(
        _segments_intersect(a, b, c, d)
        for a, b in roi_edges
        for c, d in poly_edges
    )
    crosses = any(
        _segments_cross(a, b, c, d)
        for a, b in roi_edges
        for c, d in poly_edges
    )

    if not (any(corner_in) or vertex_in_closed or touches):
        return RoiRelation.OUTSIDE
    if all(corner_in) and not crosses and not vertex_in_open:
        return RoiRelation.INSIDE
    return RoiRelation.PARTIAL


def label_roi(roi: Rect, frame: FrameAnnotation) -> RoiLabel:
    """Road/non-road assignment of one ROI from the frame's polygons.

    Only the road polygon and car polygons take part: an ROI fully inside
    the road that touches no car is the sole positive case; car-touching,
    boundary-straddling, and off-road ROIs are negatives.
    """
    road = frame.road_polygon
    if road is None:
        raise MissingRoadPolygon(f"frame {frame.frame_id!r} has no road polygon")
    relation = rect_polygon_relation(roi, road)
    if relation is RoiRelation.OUTSIDE:
        return RoiLabel(Provenance.OFF_ROAD)
    if relation is RoiRelation.PARTIAL:
        return RoiLabel(Provenance.MIXED_BOUNDARY)
    for car in frame.polygons(ObjectClass.CAR):
        if rect_polygon_relation(roi, car) is not RoiRelation.OUTSIDE:
            return RoiLabel(Provenance.CAR_OVERLAP)
    return RoiLabel(Provenance.PURE_ROAD)


# ---------------------------------------------------------------------------
# XML persistence

def parse_annotation_xml(text) -> list:
    """Decode a dataset annotation document into FrameAnnotations."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise AnnotationError(f"malformed XML: {exc}") from exc
    if root.tag != "dataset":
        raise AnnotationError(f"expected <dataset> root, got <{root.tag}>")
    frames = []
    for fr in root.iter("frame"):
        try:
            frame_id = fr.attrib["id"]
            image_ref = fr.attrib["image"]
            width = int(fr.attrib["width"])
            height = int(fr.attrib["height"])
        except (KeyError, ValueError) as exc:
            raise AnnotationError(f"bad frame attributes: {exc}") from exc
        objects = []
        for obj in fr.iter("object"):
            name = obj.attrib.get("class")
            try:
                cls = ObjectClass(name)
            except ValueError:
                raise AnnotationError(
                    f"unknown object class {name!r} in frame {frame_id!r}"
                ) from None
            pts = []
            for pt in obj.iter("pt"):
                try:
                    pts.append((float(pt.attrib["x"]), float(pt.attrib["y"])))
                except (KeyError, ValueError) as exc:
                    raise AnnotationError(f"bad <pt>: {exc}") from exc
            if len(pts) < 3:
                raise AnnotationError(
                    f"{name} polygon in frame {frame_id!r} has {len(pts)} "
                    "vertices, need >= 3"
                )
            for x, y in pts:
                if not (0 <= x <= width and 0 <= y <= height):
                    raise AnnotationError(
                        f"vertex ({x}, {y}) outside frame {frame_id!r} "
                        f"bounds {width}x{height}"
                    )
            poly = Polygon(tuple(pts))
            if not polygon_is_simple(poly):
                raise AnnotationError(
                    f"self-intersecting {name} polygon in frame {frame_id!r}"
                )
            objects.append((cls, poly))
        if sum(1 for c, _ in objects if c is ObjectClass.ROAD) > 1:
            raise AnnotationError(
                f"frame {frame_id!r} has more than one road polygon"
            )
        frames.append(
            FrameAnnotation(frame_id, image_ref, width, height, tuple(objects))
        )
    return frames


def serialize_annotation_xml(frames) -> str:
    """Encode FrameAnnotations as the dataset XML document."""
    root = ET.Element("dataset")
    for frame in frames:
        fr = ET.SubElement(
            root,
            "frame",
            id=frame.frame_id,
            image=frame.image_ref,
            width=str(frame.width),
            height=str(frame.height),
        )
        for cls, poly in frame.objects:
            obj = ET.SubElement(fr, "object")
            obj.set("class", cls.value)
            for x, y in poly.vertices:
                ET.SubElement(
                    obj,
                    "pt",
                    x=f"{x:.{COORD_DECIMALS}f}",
                    y=f"{y:.{COORD_DECIMALS}f}",
                )
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"
