"""Tree detections and annotations: records, IoU, CSV and Pascal-VOC ingestion.

Boxes use continuous edges: a box ``(x_min, y_min, x_max, y_max)`` has area
``(x_max - x_min) * (y_max - y_min)`` with no ``+1`` pixel convention.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from xml.parsers import expat

from .artifacts import atomic_write


class AnnotationError(ValueError):
    pass


class TreeClass(str, enum.Enum):
    INFECTED = "infected"
    HEALTHY = "healthy"

    @classmethod
    def parse(cls, name: str) -> "TreeClass":
        key = name.strip().lower()
        if key not in CLASS_SYNONYMS:
            raise AnnotationError(f"unknown class label {name!r}")
        return CLASS_SYNONYMS[key]


CLASS_SYNONYMS = {
    "infected": TreeClass.INFECTED,
    "dead": TreeClass.INFECTED,
    "disease": TreeClass.INFECTED,
    "healthy": TreeClass.HEALTHY,
    "normal": TreeClass.HEALTHY,
}


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise AnnotationError(f"non-finite box coordinate in {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise AnnotationError(f"inverted or empty box {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def shifted(self, dx: float, dy: float) -> "Box":
        return Box(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Annotation:
    image_id: str
    box: Box
    cls: TreeClass


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: Box
    cls: TreeClass
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise AnnotationError(f"score {self.score!r} outside [0, 1]")


@dataclass(frozen=True)
class TreePoint:
    """Box center plus box area, the crown-size proxy."""

    x: float
    y: float
    cls: TreeClass
    area: float


def iou(a: Box, b: Box) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def to_points(items) -> list[TreePoint]:
    out = []
    for it in items:
        cx, cy = it.box.center
        out.append(TreePoint(cx, cy, it.cls, it.box.area))
    return out


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

ANNOTATION_COLUMNS = ("image_id", "class", "x_min", "y_min", "x_max", "y_max")
DETECTION_COLUMNS = ("image_id", "class", "score", "x_min", "y_min", "x_max", "y_max")


def _fmt(v: float) -> str:
    # repr round-trips exactly; integral values print without a trailing ".0"
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def _num(row: dict, col: str, lineno: int) -> float:
    raw = row[col]
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise AnnotationError(f"line {lineno}: non-numeric {col} {raw!r}") from None
    if not math.isfinite(v):
        raise AnnotationError(f"line {lineno}: non-finite {col} {raw!r}")
    return v


def csv_has_scores(path) -> bool:
    """Whether a CSV file follows the detection schema (has a ``score`` column)."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise AnnotationError(f"{Path(path).name}: empty file, header row is mandatory")
    return "score" in [h.strip() for h in header]


def load_csv(path, with_scores: bool):
    """Read detections (``with_scores=True``) or annotations; row order is kept."""
    required = DETECTION_COLUMNS if with_scores else ANNOTATION_COLUMNS
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise AnnotationError(f"{Path(path).name}: empty file, header row is mandatory")
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise AnnotationError(f"{Path(path).name}: missing column(s) {', '.join(missing)}")
        for row in reader:
            lineno = reader.line_num
            if any(row.get(c) is None for c in required):
                raise AnnotationError(f"line {lineno}: too few fields")
            try:
                cls = TreeClass.parse(row["class"])
                box = Box(*(_num(row, c, lineno) for c in ("x_min", "y_min", "x_max", "y_max")))
                if with_scores:
                    records.append(Detection(row["image_id"], box, cls, _num(row, "score", lineno)))
                else:
                    records.append(Annotation(row["image_id"], box, cls))
            except AnnotationError as exc:
                msg = str(exc)
                raise AnnotationError(msg if msg.startswith("line ") else f"line {lineno}: {msg}") from None
    return records


def save_csv(records, path, with_scores: bool | None = None) -> None:
    """Write annotations or detections.

    The schema follows the record type unless ``with_scores`` is given, which
    matters for an empty list.
    """
    records = list(records)
    if with_scores is None:
        with_scores = bool(records) and isinstance(records[0], Detection)
    cols = DETECTION_COLUMNS if with_scores else ANNOTATION_COLUMNS
    lines = [",".join(cols)]
    for r in records:
        fields = [r.image_id, r.cls.value]
        if with_scores:
            fields.append(_fmt(r.score))
        fields.extend(_fmt(v) for v in r.box.as_tuple())
        lines.append(",".join(fields))
    atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


# --------------------------------------------------------------------------
# Pascal VOC (LabelImg) XML
# --------------------------------------------------------------------------


class _Node:
    __slots__ = ("tag", "line", "children", "text")

    def __init__(self, tag, line):
        self.tag = tag
        self.line = line
        self.children = []
        self.text = ""

    def find(self, tag):
        for c in self.children:
            if c.tag == tag:
                return c
        return None

    def findall(self, tag):
        return [c for c in self.children if c.tag == tag]


def _parse_xml(data: bytes) -> _Node:
    # expat directly so that every element keeps its source line
    parser = expat.ParserCreate()
    stack: list[_Node] = []
    root: list[_Node] = []

    def start(tag, attrs):
        node = _Node(tag, parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(text):
        if stack:
            stack[-1].text += text

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.Parse(data, True)
    return root[0]


def load_voc_xml(path) -> list[Annotation]:
    """Parse one LabelImg/Pascal-VOC annotation file.

    Object names map case-insensitively through ``CLASS_SYNONYMS``; any other
    label is rejected together with the line it appears on.
    """
    path = Path(path)
    try:
        root = _parse_xml(path.read_bytes())
    except expat.ExpatError as exc:
        raise AnnotationError(f"{path.name}: malformed XML: {expat.ErrorString(exc.code)} (line {exc.lineno})") from None
    if root.tag != "annotation":
        raise AnnotationError(f"{path.name}: root element is <{root.tag}>, expected <annotation>")
    fname = root.find("filename")
    image_id = Path(fname.text.strip()).stem if fname is not None and fname.text.strip() else path.stem

    out = []
    for obj in root.findall("object"):
        name = obj.find("name")
        if name is None:
            raise AnnotationError(f"{path.name}:{obj.line}: <object> without <name>")
        label = name.text.strip()
        if label.lower() not in CLASS_SYNONYMS:
            raise AnnotationError(f"{path.name}:{name.line}: unknown class label {label!r}")
        bnd = obj.find("bndbox")
        if bnd is None:
            raise AnnotationError(f"{path.name}:{obj.line}: <object> without <bndbox>")
        coords = []
        for tag in ("xmin", "ymin", "xmax", "ymax"):
            el = bnd.find(tag)
            if el is None:
                raise AnnotationError(f"{path.name}:{bnd.line}: <bndbox> missing <{tag}>")
            try:
                coords.append(float(el.text.strip()))
            except ValueError:
                raise AnnotationError(f"{path.name}:{el.line}: non-numeric <{tag}> {el.text.strip()!r}") from None
        try:
            box = Box(*coords)
        except AnnotationError as exc:
            raise AnnotationError(f"{path.name}:{bnd.line}: {exc}") from None
        out.append(Annotation(image_id, box, CLASS_SYNONYMS[label.lower()]))
    return out


def load_voc_dir(directory) -> list[Annotation]:
    out = []
    for p in sorted(Path(directory).glob("*.xml")):
        out.extend(load_voc_xml(p))
    return out
