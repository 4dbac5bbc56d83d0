"""
Radar charts of test benches and test bench configurations as SVG.

One spoke per leaf dimension, starting at 12 o'clock and running clockwise;
stage rings 1 (simulated), 2 (emulated) and 3 (real); a blue dot per element;
an orange closed line through the elements of a configuration.
"""
import logging
import math
import textwrap
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, Union

from src.backend.configuration import TestBenchConfiguration, check_membership
from src.backend.errors import ChartStyleError
from src.backend.taxonomy import Stage, TestBench

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
PLOT_FRACTION = 0.32  # outer ring radius relative to the canvas size
LABEL_FRACTION = 1.12  # spoke label distance relative to the outer ring
MAX_SPOKES = 24
CHAR_WIDTH_EM = 0.6  # rough average glyph width of a sans-serif font
LINE_HEIGHT_EM = 1.2
LABEL_PADDING = 4.0

Point = Tuple[float, float]


@dataclass(frozen=True)
class ChartStyle:
    size: int = 600
    stage_radii: Tuple[Tuple[int, float], ...] = ((1, 1 / 3), (2, 2 / 3), (3, 1.0))
    element_color: str = "blue"
    dot_radius: float = 5.0
    composition_color: str = "orange"
    line_width: float = 2.0
    offset_step: float = 4.0  # degrees between co-located dots
    show_unselected: bool = True
    font_size: int = 12

    def __post_init__(self):
        radii = self.stage_radii.items() if isinstance(self.stage_radii, Mapping) else self.stage_radii
        radii = tuple(sorted((int(k), float(v)) for k, v in radii))
        object.__setattr__(self, "stage_radii", radii)
        if [k for k, _ in radii] != [1, 2, 3]:
            raise ChartStyleError("stage_radii needs exactly the chart indices 1, 2 and 3")
        values = [v for _, v in radii]
        if not all(a < b for a, b in zip([0.0] + values, values)) or values[-1] > 1:
            raise ChartStyleError(f"stage radii must increase strictly within (0, 1], got {values}")
        if self.offset_step <= 0:
            raise ChartStyleError(f"offset_step must be > 0, got {self.offset_step}")
        if self.size <= 0 or self.dot_radius <= 0 or self.line_width <= 0:
            raise ChartStyleError("size, dot_radius and line_width must be positive")

    @property
    def center(self) -> float:
        return self.size / 2

    @property
    def plot_radius(self) -> float:
        return self.size * PLOT_FRACTION

    def stage_radius(self, stage: Stage) -> float:
        return dict(self.stage_radii)[stage.chart_index] * self.plot_radius


def _fmt(value: float) -> str:
    return f"{round(value, 2) + 0.0:.2f}"


def _polar(style: ChartStyle, radius: float, angle_deg: float) -> Point:
    theta = math.radians(angle_deg)
    return (
        round(style.center + radius * math.sin(theta), 2),
        round(style.center - radius * math.cos(theta), 2),
    )


def spoke_angles(bench: TestBench) -> Dict[str, float]:
    leaves = bench.leaves()
    return {leaf.id: 360.0 * i / len(leaves) for i, leaf in enumerate(leaves)}


def fan_offsets(count: int, step: float) -> List[float]:
    """
    Angular offsets for dots sharing one (leaf, stage): alternating sides,
    symmetric around the spoke; an odd count keeps one dot on the spoke.
    """
    start = 0 if count % 2 else 1
    offsets = []
    for i in range(start, start + count):
        magnitude = step * math.ceil(i / 2)
        offsets.append(magnitude if i % 2 else -magnitude)
    return offsets


def element_positions(bench: TestBench, style: ChartStyle) -> Dict[str, Point]:
    angles = spoke_angles(bench)
    positions: Dict[str, Point] = {}
    for leaf in bench.leaves():
        by_stage: Dict[Stage, List[str]] = {}
        for element in bench.elements_of(leaf.id):
            by_stage.setdefault(element.stage, []).append(element.id)
        for stage, ids in by_stage.items():
            for element_id, offset in zip(ids, fan_offsets(len(ids), style.offset_step)):
                positions[element_id] = _polar(style, style.stage_radius(stage), angles[leaf.id] + offset)
    return positions


def composition_vertices(config: TestBenchConfiguration, bench: TestBench, style: ChartStyle) -> List[Point]:
    """One vertex per leaf; several selected elements contribute their centroid."""
    check_membership(config, bench)
    positions = element_positions(bench, style)
    vertices = []
    for _, ids in config.selection:
        points = [positions[element_id] for element_id in ids]
        vertices.append((
            round(sum(x for x, _ in points) / len(points), 2),
            round(sum(y for _, y in points) / len(points), 2),
        ))
    return vertices


def _label_anchor(angle_deg: float) -> str:
    s = math.sin(math.radians(angle_deg))
    if abs(s) < 0.1:
        return "middle"
    return "start" if s > 0 else "end"


def wrap_label(text: str, x: float, anchor: str, style: ChartStyle) -> List[str]:
    """Break a spoke label into lines that fit between its anchor and the canvas edge."""
    if anchor == "start":
        available = style.size - x - LABEL_PADDING
    elif anchor == "end":
        available = x - LABEL_PADDING
    else:
        available = 2 * (min(x, style.size - x) - LABEL_PADDING)
    max_chars = max(1, int(available / (CHAR_WIDTH_EM * style.font_size)))
    return textwrap.wrap(text, width=max_chars, break_long_words=False) or [text]


def label_extent(x: float, y: float, anchor: str, lines: List[str], font_size: int) -> Tuple[float, float, float, float]:
    """Estimated (left, top, right, bottom) of a label block vertically centered on y."""
    width = max(len(line) for line in lines) * CHAR_WIDTH_EM * font_size
    height = len(lines) * LINE_HEIGHT_EM * font_size
    if anchor == "start":
        left = x
    elif anchor == "end":
        left = x - width
    else:
        left = x - width / 2
    return left, y - height / 2, left + width, y + height / 2


def _view_margin(extents: List[Tuple[float, float, float, float]], size: int) -> int:
    overflow = [0.0]
    for left, top, right, bottom in extents:
        overflow.extend((-left, -top, right - size, bottom - size))
    return math.ceil(max(overflow))


def _render(
    bench: TestBench,
    style: ChartStyle,
    title: str,
    config: Optional[TestBenchConfiguration] = None,
) -> str:
    leaves = bench.leaves()
    if len(leaves) > MAX_SPOKES:
        logger.warning(f"Bench {bench.id} has {len(leaves)} spokes; labels will overlap beyond {MAX_SPOKES}")
    angles = spoke_angles(bench)
    size = str(style.size)
    c = style.center

    labels = {}
    for leaf in leaves:
        lx, ly = _polar(style, style.plot_radius * LABEL_FRACTION, angles[leaf.id])
        anchor = _label_anchor(angles[leaf.id])
        labels[leaf.id] = (lx, ly, anchor, wrap_label(leaf.display_name, lx, anchor, style))
    # the canvas grows evenly on every side so labels that still overflow stay visible
    margin = _view_margin([label_extent(x, y, a, lines, style.font_size) for x, y, a, lines in labels.values()],
                          style.size)
    view = str(style.size + 2 * margin)

    root = ET.Element("svg", {
        "xmlns": SVG_NS,
        "version": "1.1",
        "width": size,
        "height": size,
        "viewBox": f"{-margin} {-margin} {view} {view}",
        "font-family": "sans-serif",
        "font-size": str(style.font_size),
    })
    ET.SubElement(root, "title").text = title
    ET.SubElement(root, "rect", {"x": str(-margin), "y": str(-margin), "width": view, "height": view,
                                 "fill": "white"})

    rings = ET.SubElement(root, "g", {"id": "stages", "fill": "none", "stroke": "#999999"})
    for stage in sorted(Stage, key=lambda s: s.chart_index):
        r = style.stage_radius(stage)
        ET.SubElement(rings, "circle", {
            "class": "stage-ring", "data-stage": stage.value,
            "cx": _fmt(c), "cy": _fmt(c), "r": _fmt(r),
        })
        label = ET.SubElement(rings, "text", {
            "x": _fmt(c + 4), "y": _fmt(c - r - 4), "fill": "#666666", "stroke": "none",
        })
        label.text = str(stage.chart_index)

    for leaf in leaves:
        angle = angles[leaf.id]
        group = ET.SubElement(root, "g", {"id": f"spoke-{leaf.id}", "class": "spoke"})
        x, y = _polar(style, style.plot_radius * 1.05, angle)
        ET.SubElement(group, "line", {
            "x1": _fmt(c), "y1": _fmt(c), "x2": _fmt(x), "y2": _fmt(y), "stroke": "#333333",
        })
        lx, ly, anchor, lines = labels[leaf.id]
        text = ET.SubElement(group, "text", {
            "x": _fmt(lx), "y": _fmt(ly), "text-anchor": anchor, "dominant-baseline": "middle",
        })
        if len(lines) == 1:
            text.text = lines[0]
        else:
            line_height = LINE_HEIGHT_EM * style.font_size
            for i, line in enumerate(lines):
                dy = -(len(lines) - 1) / 2 * line_height if i == 0 else line_height
                ET.SubElement(text, "tspan", {"x": _fmt(lx), "dy": _fmt(dy)}).text = line

    positions = element_positions(bench, style)
    selected = set(config.element_ids()) if config is not None else set()
    dots = ET.SubElement(root, "g", {"id": "elements"})
    for element in bench.elements:
        is_selected = element.id in selected
        if config is not None and not is_selected and not style.show_unselected:
            continue
        x, y = positions[element.id]
        attrs = {
            "id": f"element-{element.id}",
            "class": "element selected" if is_selected else "element",
            "data-dimension": element.dimension,
            "data-stage": element.stage.value,
            "cx": _fmt(x), "cy": _fmt(y), "r": _fmt(style.dot_radius),
            "fill": style.element_color,
        }
        if is_selected:
            attrs.update({"stroke": style.composition_color, "stroke-width": _fmt(style.line_width)})
        dot = ET.SubElement(dots, "circle", attrs)
        ET.SubElement(dot, "title").text = element.display_name

    if config is not None:
        composition = ET.SubElement(root, "g", {"id": "composition"})
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in composition_vertices(config, bench, style))
        ET.SubElement(composition, "polygon", {
            "class": "composition",
            "points": points,
            "fill": "none",
            "stroke": style.composition_color,
            "stroke-width": _fmt(style.line_width),
        })

    ET.indent(root)
    for text in root.iter("text"):
        # indentation inside <text> would render as spaces around the wrapped lines
        if len(text):
            text.text = None
            for tspan in text:
                tspan.tail = None
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def render_bench_chart(bench: TestBench, style: Optional[ChartStyle] = None) -> str:
    return _render(bench, style or ChartStyle(), bench.display_name)


def render_configuration_chart(
    config: TestBenchConfiguration,
    bench: TestBench,
    style: Optional[ChartStyle] = None,
    title: Optional[str] = None,
) -> str:
    check_membership(config, bench)
    return _render(bench, style or ChartStyle(), title or f"{bench.display_name}: configuration", config)


def render_scale_chart(style: Optional[ChartStyle] = None) -> str:
    """Blank classification template: the ten canonical spokes and the stage rings."""
    return _render(TestBench.skeleton("empty", "Stages: 1 = simulated, 2 = emulated, 3 = real"),
                   style or ChartStyle(), "Stages: 1 = simulated, 2 = emulated, 3 = real")


def style_from_options(options: Mapping[str, Union[int, float, bool]]) -> ChartStyle:
    """Build a style from settings keys, ignoring the ones a style does not know."""
    known = {
        "chart_size": "size",
        "offset_step": "offset_step",
        "show_unselected": "show_unselected",
        "dot_radius": "dot_radius",
        "line_width": "line_width",
    }
    return ChartStyle(**{field: options[key] for key, field in known.items() if key in options})
