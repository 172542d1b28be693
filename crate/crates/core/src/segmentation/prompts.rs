use super::Skeleton;
use crate::geometry::Pixel;

/// Split `n` over `weights` proportionally by largest remainder; remainder
/// ties go to the lower index.
pub(crate) fn allocate(weights: &[usize], n: usize) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut share: Vec<usize> = weights.iter().map(|w| w * n / total).collect();
    let mut left = n - share.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // remainder of w*n/total, compared exactly as integers
    order.sort_by(|&a, &b| {
        ((weights[b] * n) % total)
            .cmp(&((weights[a] * n) % total))
            .then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        share[i] += 1;
        left -= 1;
    }
    share
}

/// `n` prompts spread along the skeleton: paths get a share proportional to
/// their length, and each share is placed at the midpoints of equal arc
/// intervals along its path.
pub fn sample_prompts(skel: &Skeleton, n: usize) -> Vec<Pixel> {
    let lens: Vec<usize> = skel.paths.iter().map(Vec::len).collect();
    let shares = allocate(&lens, n);
    let mut out = Vec::with_capacity(n);
    for (path, &k) in skel.paths.iter().zip(&shares) {
        let len = path.len();
        for j in 0..k {
            let idx = ((2 * j + 1) * len) / (2 * k);
            out.push(path[idx.min(len - 1)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(len: usize, row: usize) -> Vec<Pixel> {
        (0..len).map(|x| Pixel::new(x, row)).collect()
    }

    #[test]
    fn midpoint_rule_on_one_path() {
        let sk = Skeleton {
            paths: vec![path(100, 0)],
            source: None,
        };
        let xs: Vec<usize> = sample_prompts(&sk, 5).iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![10, 30, 50, 70, 90]);
        assert_eq!(sample_prompts(&sk, 1), vec![Pixel::new(50, 0)]);
    }

    #[test]
    fn allocation_is_proportional() {
        let sk = Skeleton {
            paths: vec![path(60, 0), path(40, 1)],
            source: None,
        };
        let p = sample_prompts(&sk, 10);
        assert_eq!(p.iter().filter(|q| q.y == 0).count(), 6);
        assert_eq!(p.iter().filter(|q| q.y == 1).count(), 4);
    }

    #[test]
    fn largest_remainder_sums_exactly() {
        assert_eq!(allocate(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(allocate(&[5, 3, 2], 7).iter().sum::<usize>(), 7);
        assert_eq!(allocate(&[], 3), Vec::<usize>::new());
    }
}
