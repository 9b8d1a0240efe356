use super::{Layout, RasterImage, RenderConfig, RenderError, Rgb};
use crate::graph::ColoredGraph;

/// Fixed-point subpixel bits.
const SHIFT: u32 = 8;
const ONE: i64 = 1 << SHIFT;

const OUTLINE: Rgb = [0, 0, 0];

fn to_fixed(v: f64, size: usize) -> i64 {
    (v * size as f64 * ONE as f64).round() as i64
}

fn blend(dst: Rgb, src: Rgb, alpha: i64) -> Rgb {
    let mut out = [0u8; 3];
    for k in 0..3 {
        let v = (i64::from(dst[k]) * (ONE - alpha) + i64::from(src[k]) * alpha + ONE / 2) >> SHIFT;
        out[k] = v as u8;
    }
    out
}

/// Distance from `p` to segment `a`-`b`, all in fixed point.
fn segment_distance(p: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (px, py) = (p.0 - a.0, p.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let (cx, cy) = if len2 == 0 {
        (0, 0)
    } else {
        let t = (px * dx + py * dy).clamp(0, len2);
        ((t * dx).div_euclid(len2), (t * dy).div_euclid(len2))
    };
    let (ex, ey) = (px - cx, py - cy);
    ((ex * ex + ey * ey) as u64).isqrt() as i64
}

/// Anti-aliased thick line with round caps: coverage ramps linearly over
/// one pixel around the stroke boundary.
fn draw_line(img: &mut RasterImage, a: (i64, i64), b: (i64, i64), width: usize, color: Rgb) {
    let half = width as i64 * ONE / 2;
    let reach = half + ONE;
    let lo_x = ((a.0.min(b.0) - reach) >> SHIFT).max(0);
    let hi_x = ((a.0.max(b.0) + reach) >> SHIFT).min(img.width() as i64 - 1);
    let lo_y = ((a.1.min(b.1) - reach) >> SHIFT).max(0);
    let hi_y = ((a.1.max(b.1) + reach) >> SHIFT).min(img.height() as i64 - 1);
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let center = (x * ONE + ONE / 2, y * ONE + ONE / 2);
            let d = segment_distance(center, a, b);
            let alpha = (half + ONE / 2 - d).clamp(0, ONE);
            if alpha > 0 {
                let (ux, uy) = (x as usize, y as usize);
                let c = blend(img.get(ux, uy), color, alpha);
                img.put(ux, uy, c);
            }
        }
    }
}

/// Filled disc of `radius` pixels with a one-pixel outline.
fn draw_disc(img: &mut RasterImage, c: (i64, i64), radius: usize, fill: Rgb) {
    let inner = radius as i64 * ONE;
    let outer = inner + ONE;
    let lo_x = ((c.0 - outer) >> SHIFT).max(0);
    let hi_x = ((c.0 + outer) >> SHIFT).min(img.width() as i64 - 1);
    let lo_y = ((c.1 - outer) >> SHIFT).max(0);
    let hi_y = ((c.1 + outer) >> SHIFT).min(img.height() as i64 - 1);
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let (dx, dy) = (x * ONE + ONE / 2 - c.0, y * ONE + ONE / 2 - c.1);
            let d2 = dx * dx + dy * dy;
            if d2 <= inner * inner {
                img.put(x as usize, y as usize, fill);
            } else if d2 <= outer * outer {
                img.put(x as usize, y as usize, OUTLINE);
            }
        }
    }
}

/// Draws edges first, then nodes on top, onto a white square canvas.
pub fn rasterize(g: &ColoredGraph, layout: &Layout, cfg: &RenderConfig) -> Result<RasterImage, RenderError> {
    if layout.positions.len() != g.node_count() {
        return Err(RenderError::LayoutMismatch(layout.positions.len(), g.node_count()));
    }
    let need_nodes = g.node_colors().iter().map(|&c| usize::from(c) + 1).max().unwrap_or(0);
    let need_edges = g.edges().iter().map(|e| usize::from(e.color) + 1).max().unwrap_or(0);
    cfg.check_palettes(need_nodes, need_edges)?;

    let size = cfg.size;
    let fixed: Vec<(i64, i64)> = layout
        .positions
        .iter()
        .map(|&(x, y)| (to_fixed(x, size), to_fixed(y, size)))
        .collect();
    let mut img = RasterImage::white(size, size);
    for e in g.edges() {
        let color = cfg.edge_palette[usize::from(e.color)];
        draw_line(&mut img, fixed[e.u], fixed[e.v], cfg.line_width, color);
    }
    for (i, &p) in fixed.iter().enumerate() {
        draw_disc(&mut img, p, cfg.node_radius, cfg.node_palette[usize::from(g.node_color(i))]);
    }
    Ok(img)
}
