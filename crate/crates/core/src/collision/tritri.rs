//! Triangle–triangle intersection with a contact tolerance.

use nalgebra::{Point3, Vector3};

type Tri = [Point3<f64>; 3];

/// Penetration estimate (m) if the triangles intersect by more than `epsilon`.
///
/// Crossing triangles must each reach beyond `epsilon` on both sides of the
/// other's plane, and their intervals on the common intersection line must
/// overlap by more than `epsilon`; the estimate is the larger of the two
/// shallower plane excursions. Touching along an edge or vertex is therefore
/// not an intersection.
///
/// Coplanar triangles (within `epsilon`) intersect only when their normals
/// agree and their overlap is wider than `epsilon`: for closed meshes that
/// means the two solids share volume behind the face, while opposed normals
/// are face-to-face contact. The estimate is then the overlap width.
pub fn triangles_intersect(a: &Tri, b: &Tri, epsilon: f64) -> Option<f64> {
    // evaluate in a canonical order so the result is exactly symmetric
    if lex_greater(a, b) {
        return triangles_intersect(b, a, epsilon);
    }
    let na = (a[1] - a[0]).cross(&(a[2] - a[0]));
    let nb = (b[1] - b[0]).cross(&(b[2] - b[0]));
    let (na_len, nb_len) = (na.norm(), nb.norm());
    if na_len == 0.0 || nb_len == 0.0 {
        return None;
    }
    let na = na / na_len;
    let nb = nb / nb_len;
    let db = b.map(|p| na.dot(&(p - a[0])));
    let da = a.map(|p| nb.dot(&(p - b[0])));
    let reach = |d: &[f64; 3]| {
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        (hi, -lo)
    };
    let (b_up, b_down) = reach(&db);
    let (a_up, a_down) = reach(&da);
    if b_up.max(b_down) <= epsilon && a_up.max(a_down) <= epsilon {
        if na.dot(&nb) <= 0.0 {
            return None;
        }
        let width = coplanar_overlap_width(a, b, &na);
        return (width > epsilon).then_some(width);
    }
    if b_up <= epsilon || b_down <= epsilon || a_up <= epsilon || a_down <= epsilon {
        return None;
    }
    let dir = na.cross(&nb);
    let dir_len = dir.norm();
    if dir_len < 1e-15 {
        return None;
    }
    let dir = dir / dir_len;
    let (a_lo, a_hi) = plane_interval(a, &da, &dir)?;
    let (b_lo, b_hi) = plane_interval(b, &db, &dir)?;
    let overlap = a_hi.min(b_hi) - a_lo.max(b_lo);
    if overlap <= epsilon {
        return None;
    }
    Some(b_up.min(b_down).max(a_up.min(a_down)))
}

/// Extent along `dir` of the segment where `tri` crosses the plane with signed
/// vertex distances `d`.
fn plane_interval(tri: &Tri, d: &[f64; 3], dir: &Vector3<f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut add = |p: Point3<f64>| {
        let s = dir.dot(&p.coords);
        lo = lo.min(s);
        hi = hi.max(s);
    };
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        if d[i] == 0.0 {
            add(tri[i]);
        }
        if (d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0) {
            let t = d[i] / (d[i] - d[j]);
            add(tri[i] + (tri[j] - tri[i]) * t);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Minimum width of the overlap of two coplanar triangles (0 if they are disjoint).
fn coplanar_overlap_width(a: &Tri, b: &Tri, normal: &Vector3<f64>) -> f64 {
    let u = (a[1] - a[0]).normalize();
    let v = normal.cross(&u);
    let flat = |t: &Tri| t.map(|p| [(p - a[0]).dot(&u), (p - a[0]).dot(&v)]);
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| {
        (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])
    };
    let mut clip = flat(b);
    if cross(clip[0], clip[1], clip[2]) < 0.0 {
        clip.swap(1, 2);
    }
    let mut poly: Vec<[f64; 2]> = flat(a).to_vec();
    for k in 0..3 {
        let (e0, e1) = (clip[k], clip[(k + 1) % 3]);
        let input = std::mem::take(&mut poly);
        for i in 0..input.len() {
            let (p, q) = (input[i], input[(i + 1) % input.len()]);
            let (sp, sq) = (cross(e0, e1, p), cross(e0, e1, q));
            if sp >= 0.0 {
                poly.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                poly.push([p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]);
            }
        }
        if poly.is_empty() {
            return 0.0;
        }
    }
    if poly.len() < 3 {
        return 0.0;
    }
    // the minimum width of a convex polygon is attained across one of its edges
    let mut width = f64::INFINITY;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        if len < 1e-300 {
            continue;
        }
        let far = poly
            .iter()
            .map(|&r| cross(p, q, r).abs() / len)
            .fold(0.0, f64::max);
        width = width.min(far);
    }
    if width.is_finite() {
        width
    } else {
        0.0
    }
}

fn lex_greater(a: &Tri, b: &Tri) -> bool {
    for (p, q) in a.iter().zip(b) {
        for k in 0..3 {
            match p[k].total_cmp(&q[k]) {
                std::cmp::Ordering::Greater => return true,
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}
