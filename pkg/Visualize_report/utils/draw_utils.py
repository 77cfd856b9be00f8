import math
from collections import OrderedDict
from pathlib import Path

from loguru import logger
from reportlab.graphics import renderSVG
from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Drawing, String
from reportlab.graphics.widgets.markers import makeMarker
from reportlab.lib import colors

from Visualize_report.utils.common import safe_stem
from utils import atomic_write_text

# 画布配置 (单位 pt)
CHART_WIDTH = 420
CHART_HEIGHT = 300
PLOT_BOX = (60, 50, 330, 200)  # x, y, w, h
REL_ERR_FLOOR = 1e-16  # rel_err = 0 时的对数下限

# 通过 / 失败的点颜色
LINE_COLOR = colors.HexColor("#3366cc")
FAIL_COLOR = colors.HexColor("#cc3333")


def _padded_range(values):
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def log_points(records):
    """(log10 u, log10 rel_err) 点列，按 u 递增排序；缺 u 或 rel_err 的记录跳过。"""
    points = []
    for r in records:
        if r.u is None or r.rel_err is None or r.u <= 0:
            continue
        err = max(float(r.rel_err), REL_ERR_FLOOR)
        points.append((math.log10(r.u), math.log10(err), r.passed))
    points.sort(key=lambda p: p[0])
    return points


def render_line_chart(check_id, points):
    """
    绘制一条 log rel_err – log u 折线，返回 SVG 字符串。

    Args:
        check_id: 检查编号，用作标题
        points: [(log10 u, log10 rel_err, passed), ...]
    """
    d = Drawing(CHART_WIDTH, CHART_HEIGHT)
    d.add(String(CHART_WIDTH / 2, CHART_HEIGHT - 25, check_id, fontSize=12, textAnchor="middle"))
    x, y, w, h = PLOT_BOX

    if not points:
        # 没有可画的点 (例如只有指数拟合的检查)
        d.add(String(CHART_WIDTH / 2, CHART_HEIGHT / 2, "no plottable points", fontSize=10, textAnchor="middle"))
        return renderSVG.drawToString(d)

    lp = LinePlot()
    lp.x, lp.y, lp.width, lp.height = x, y, w, h
    lp.data = [[(px, py) for px, py, _ in points]]
    lp.lines[0].strokeColor = LINE_COLOR
    lp.lines[0].strokeWidth = 1.2
    lp.lines[0].symbol = makeMarker("Circle")
    lp.lines[0].symbol.size = 4
    xmin, xmax = _padded_range([p[0] for p in points])
    ymin, ymax = _padded_range([p[1] for p in points])
    lp.xValueAxis.valueMin, lp.xValueAxis.valueMax = xmin, xmax
    lp.yValueAxis.valueMin, lp.yValueAxis.valueMax = ymin, ymax
    lp.xValueAxis.labelTextFormat = "%.2f"
    lp.yValueAxis.labelTextFormat = "%.1f"
    d.add(lp)

    # 失败点叠加红色标记
    for px, py, passed in points:
        if passed:
            continue
        mark = makeMarker("Cross")
        mark.x = x + (px - xmin) / (xmax - xmin) * w
        mark.y = y + (py - ymin) / (ymax - ymin) * h
        mark.size = 7
        mark.strokeColor = FAIL_COLOR
        d.add(mark)

    d.add(String(x + w / 2, 15, "log10 u", fontSize=9, textAnchor="middle"))
    d.add(String(15, y + h / 2, "log10 rel_err", fontSize=9, textAnchor="middle"))
    return renderSVG.drawToString(d)


def draw_rel_err_lines(records, output_dir):
    """
    每个 check_id 一张 SVG 折线图。

    Args:
        records: CheckRecord 列表 (需要 check_id / u / rel_err / passed 属性)
        output_dir: 输出目录

    Returns:
        写出的文件路径列表，数量等于不同 check_id 的个数
    """
    output_dir = Path(output_dir)
    groups = OrderedDict()
    for r in records:
        groups.setdefault(r.check_id, []).append(r)

    written = []
    for check_id, items in groups.items():
        path = output_dir / f"{safe_stem(check_id)}.svg"
        try:
            svg = render_line_chart(check_id, log_points(items))
        except Exception as e:
            logger.error(f"绘制 {check_id} 失败: {e}")
            raise
        written.append(atomic_write_text(path, svg))
    logger.info(f"svg-lines: {len(written)} 张图写入 {output_dir}")
    return written
