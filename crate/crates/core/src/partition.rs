//! Element partitions and element-level distances.
//!
//! Items are opaque dense identifiers `0..num_items`; callers that work with
//! string identifiers intern them first. Clusters are numbered `0..K`
//! internally (the partition file format is 1-based).

use std::collections::BTreeMap;

use crate::error::{dimension, domain, Error, Result};
use crate::matching::min_cost_assignment;

pub type ItemId = usize;

/// A total assignment of items to `K` clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementPartition {
    num_clusters: usize,
    assign: Vec<usize>,
}

impl ElementPartition {
    /// `assign[item]` is the 0-based cluster of `item`.
    pub fn new(num_clusters: usize, assign: Vec<usize>) -> Result<Self> {
        if num_clusters == 0 {
            return domain("a partition needs at least one cluster");
        }
        if let Some((item, &k)) = assign.iter().enumerate().find(|(_, &k)| k >= num_clusters) {
            return domain(format!("item {item} assigned to cluster {k}, but K = {num_clusters}"));
        }
        Ok(Self { num_clusters, assign })
    }

    /// Everything in one cluster; element-level privacy becomes user-level.
    pub fn single_cluster(num_items: usize) -> Self {
        Self { num_clusters: 1, assign: vec![0; num_items] }
    }

    /// Each item is its own element.
    pub fn singletons(num_items: usize) -> Self {
        Self { num_clusters: num_items.max(1), assign: (0..num_items).collect() }
    }

    /// `K` contiguous blocks of (nearly) equal size over `0..num_items`.
    pub fn contiguous(num_items: usize, num_clusters: usize) -> Result<Self> {
        if num_clusters == 0 || num_clusters > num_items.max(1) {
            return domain(format!("cannot split {num_items} items into {num_clusters} clusters"));
        }
        let assign = (0..num_items).map(|j| j * num_clusters / num_items).collect();
        Self::new(num_clusters, assign)
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_items(&self) -> usize {
        self.assign.len()
    }

    pub fn cluster_of(&self, item: ItemId) -> Result<usize> {
        self.assign.get(item).copied().ok_or(Error::Assignment { item, num_items: self.assign.len() })
    }

    /// Dense assignment table, indexed by item.
    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    /// Members of every cluster, in item order.
    pub fn clusters(&self) -> Vec<Vec<ItemId>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (item, &k) in self.assign.iter().enumerate() {
            out[k].push(item);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &k in &self.assign {
            sizes[k] += 1;
        }
        sizes
    }

    /// `P(c_k) = sum of p_j over j in c_k`.
    pub fn cluster_mass(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.assign.len() {
            return dimension(format!("{} probabilities for {} items", p.len(), self.assign.len()));
        }
        let mut mass = vec![0.0; self.num_clusters];
        for (&k, &pj) in self.assign.iter().zip(p) {
            mass[k] += pj;
        }
        Ok(mass)
    }
}

/// One user's multiset of items. Zero counts are not stored, so two users
/// compare equal exactly when their multisets are equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct UserData {
    items: BTreeMap<ItemId, u64>,
}

impl UserData {
    pub fn from_counts<I: IntoIterator<Item = (ItemId, u64)>>(counts: I) -> Self {
        let mut items = BTreeMap::new();
        for (item, c) in counts {
            if c > 0 {
                *items.entry(item).or_insert(0) += c;
            }
        }
        Self { items }
    }

    /// Counts indexed by item.
    pub fn from_dense(counts: &[u64]) -> Self {
        Self::from_counts(counts.iter().copied().enumerate())
    }

    pub fn count(&self, item: ItemId) -> u64 {
        self.items.get(&item).copied().unwrap_or(0)
    }

    pub fn items(&self) -> impl Iterator<Item = (ItemId, u64)> + '_ {
        self.items.iter().map(|(&i, &c)| (i, c))
    }

    /// `m(u)`, the total count.
    pub fn total(&self) -> u64 {
        self.items.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Disjoint decomposition into per-cluster sub-multisets (nonempty
    /// clusters only).
    pub fn by_cluster(&self, part: &ElementPartition) -> Result<BTreeMap<usize, Vec<(ItemId, u64)>>> {
        let mut out: BTreeMap<usize, Vec<(ItemId, u64)>> = BTreeMap::new();
        for (&item, &c) in &self.items {
            out.entry(part.cluster_of(item)?).or_default().push((item, c));
        }
        Ok(out)
    }
}

/// An ordered list of `n >= 1` users. Order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    users: Vec<UserData>,
}

impl Sample {
    pub fn new(users: Vec<UserData>) -> Result<Self> {
        if users.is_empty() {
            return domain("a sample needs at least one user");
        }
        Ok(Self { users })
    }

    pub fn users(&self) -> &[UserData] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Number of clusters on which the two users' sub-multisets differ.
pub fn user_distance(a: &UserData, b: &UserData, part: &ElementPartition) -> Result<usize> {
    let ca = a.by_cluster(part)?;
    let cb = b.by_cluster(part)?;
    let differing_in_a = ca.iter().filter(|(k, items)| cb.get(k) != Some(*items)).count();
    let only_in_b = cb.keys().filter(|k| !ca.contains_key(k)).count();
    Ok(differing_in_a + only_in_b)
}

/// Pairwise user distances, `matrix[u][v] = d_user(S_u, T_v)`.
pub fn distance_matrix(s: &Sample, t: &Sample, part: &ElementPartition) -> Result<Vec<Vec<usize>>> {
    if s.len() != t.len() {
        return dimension(format!("samples of different sizes: {} vs {}", s.len(), t.len()));
    }
    s.users().iter().map(|a| t.users().iter().map(|b| user_distance(a, b, part)).collect()).collect()
}

/// `min over permutations pi of sum_u d_user(S_u, T_pi(u))`, solved exactly
/// as a min-cost bipartite matching.
pub fn element_distance(s: &Sample, t: &Sample, part: &ElementPartition) -> Result<usize> {
    let m = distance_matrix(s, t, part)?;
    let cost: Vec<Vec<i64>> = m.iter().map(|row| row.iter().map(|&d| d as i64).collect()).collect();
    Ok(min_cost_assignment(&cost)?.cost as usize)
}

pub fn is_element_neighbor(s: &Sample, t: &Sample, part: &ElementPartition) -> Result<bool> {
    Ok(element_distance(s, t, part)? <= 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const YO: ItemId = 0;
    const BRO: ItemId = 1;

    fn user(pairs: &[(ItemId, u64)]) -> UserData {
        UserData::from_counts(pairs.iter().copied())
    }

    fn brute_min(m: &[Vec<usize>]) -> usize {
        fn rec(m: &[Vec<usize>], row: usize, used: &mut [bool]) -> usize {
            if row == m.len() {
                return 0;
            }
            let mut best = usize::MAX;
            for j in 0..m.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(m[row][j] + rec(m, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(m, 0, &mut vec![false; m.len()])
    }

    fn random_user<R: Rng>(rng: &mut R, items: usize, max_count: u64) -> UserData {
        UserData::from_counts((0..items).map(|i| (i, rng.random_range(0..=max_count))))
    }

    #[test]
    fn identical_users_are_at_distance_zero() {
        let part = ElementPartition::singletons(4);
        let a = user(&[(YO, 3), (BRO, 3)]);
        assert_eq!(user_distance(&a, &a, &part).unwrap(), 0);
    }

    #[test]
    fn yo_bro_example() {
        let part = ElementPartition::singletons(10);
        let a = user(&[(YO, 3), (BRO, 3)]);
        let b = user(&[(YO, 2), (BRO, 1)]);
        assert_eq!(user_distance(&a, &b, &part).unwrap(), 2);
        assert_eq!(user_distance(&b, &a, &part).unwrap(), 2);
    }

    #[test]
    fn one_count_change_is_one_cluster() {
        let part = ElementPartition::singletons(3);
        let a = user(&[(YO, 3), (2, 1)]);
        let b = user(&[(YO, 5), (2, 1)]);
        assert_eq!(user_distance(&a, &b, &part).unwrap(), 1);
        // an item appearing only in one user also counts
        let c = user(&[(YO, 3)]);
        assert_eq!(user_distance(&a, &c, &part).unwrap(), 1);
    }

    #[test]
    fn unassigned_item_is_an_error() {
        let part = ElementPartition::singletons(2);
        let a = user(&[(5, 1)]);
        assert_eq!(user_distance(&a, &a, &part), Err(Error::Assignment { item: 5, num_items: 2 }));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let part = ElementPartition::singletons(2);
        let s = Sample::new(vec![user(&[(0, 1)])]).unwrap();
        let t = Sample::new(vec![user(&[(0, 1)]), user(&[(1, 1)])]).unwrap();
        assert!(matches!(element_distance(&s, &t, &part), Err(Error::Dimension(_))));
        assert!(Sample::new(vec![]).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let part = ElementPartition::contiguous(6, 3).unwrap(); // {0,1} {2,3} {4,5}
        let a = user(&[(0, 2), (2, 1), (4, 4)]);
        let b = user(&[(1, 2), (3, 7)]);
        let s = Sample::new(vec![a.clone(), b.clone()]).unwrap();
        assert!(is_element_neighbor(&s, &s, &part).unwrap());

        // one user rewrites everything inside cluster {0,1}
        let a2 = user(&[(0, 9), (1, 5), (2, 1), (4, 4)]);
        let t = Sample::new(vec![b.clone(), a2]).unwrap();
        assert_eq!(element_distance(&s, &t, &part).unwrap(), 1);
        assert!(is_element_neighbor(&s, &t, &part).unwrap());

        // two users each change one cluster
        let a3 = user(&[(0, 2), (2, 1), (4, 5)]);
        let b3 = user(&[(1, 2), (3, 6)]);
        let t = Sample::new(vec![a3, b3]).unwrap();
        assert_eq!(element_distance(&s, &t, &part).unwrap(), 2);
        assert!(!is_element_neighbor(&s, &t, &part).unwrap());
    }

    #[test]
    fn cross_matching_example() {
        let part = ElementPartition::singletons(3);
        let s = Sample::new(vec![user(&[(0, 1), (1, 1)]), user(&[(0, 2), (1, 2), (2, 1)])]).unwrap();
        let t = Sample::new(vec![user(&[(0, 2), (1, 2)]), user(&[(0, 1), (1, 1)])]).unwrap();
        let m = distance_matrix(&s, &t, &part).unwrap();
        assert_eq!(m, vec![vec![2, 0], vec![1, 3]]);
        // identity pairing costs 5, the cross pairing 1
        assert_eq!(brute_min(&m), 1);
        assert_eq!(element_distance(&s, &t, &part).unwrap(), 1);
    }

    #[test]
    fn matching_agrees_with_permutation_oracle() {
        let mut rng = crate::rng::seeded(2024);
        let part = ElementPartition::contiguous(6, 3).unwrap();
        for trial in 0..200 {
            let n = 1 + trial % 4;
            let s = Sample::new((0..n).map(|_| random_user(&mut rng, 6, 1)).collect()).unwrap();
            let t = Sample::new((0..n).map(|_| random_user(&mut rng, 6, 1)).collect()).unwrap();
            let m = distance_matrix(&s, &t, &part).unwrap();
            assert_eq!(element_distance(&s, &t, &part).unwrap(), brute_min(&m));
        }
    }

    #[test]
    fn single_cluster_recovers_hamming() {
        let mut rng = crate::rng::seeded(77);
        for trial in 0..100 {
            let n = 1 + trial % 4;
            let items = 3;
            let part = ElementPartition::single_cluster(items);
            let s = Sample::new((0..n).map(|_| random_user(&mut rng, items, 1)).collect()).unwrap();
            let t = Sample::new((0..n).map(|_| random_user(&mut rng, items, 1)).collect()).unwrap();
            let hamming: Vec<Vec<usize>> =
                s.users().iter().map(|a| t.users().iter().map(|b| usize::from(a != b)).collect()).collect();
            assert_eq!(element_distance(&s, &t, &part).unwrap(), brute_min(&hamming));
        }
    }

    proptest! {
        #[test]
        fn user_distance_bounds(a in proptest::collection::vec(0u64..3, 8),
                                b in proptest::collection::vec(0u64..3, 8),
                                k in 1usize..=8) {
            let part = ElementPartition::contiguous(8, k).unwrap();
            let (ua, ub) = (UserData::from_dense(&a), UserData::from_dense(&b));
            let d = user_distance(&ua, &ub, &part).unwrap();
            prop_assert!(d <= k);
            prop_assert_eq!(d, user_distance(&ub, &ua, &part).unwrap());
            prop_assert_eq!(d == 0, ua.by_cluster(&part).unwrap() == ub.by_cluster(&part).unwrap());
        }

        #[test]
        fn element_distance_is_symmetric_and_permutation_invariant(
            raw in proptest::collection::vec(0u64..2, 24), shift in 0usize..3) {
            let part = ElementPartition::contiguous(4, 2).unwrap();
            let users: Vec<UserData> = raw.chunks(4).map(UserData::from_dense).collect();
            let s = Sample::new(users[..3].to_vec()).unwrap();
            let t = Sample::new(users[3..].to_vec()).unwrap();
            let mut rotated = users[3..].to_vec();
            rotated.rotate_left(shift);
            let t_rot = Sample::new(rotated).unwrap();
            let d = element_distance(&s, &t, &part).unwrap();
            prop_assert_eq!(d, element_distance(&t, &s, &part).unwrap());
            prop_assert_eq!(d, element_distance(&s, &t_rot, &part).unwrap());
            // zero iff equal as multisets of users
            let mut a = s.users().to_vec();
            let mut b = t.users().to_vec();
            a.sort_by(|x, y| x.items().cmp(y.items()));
            b.sort_by(|x, y| x.items().cmp(y.items()));
            prop_assert_eq!(d == 0, a == b);
        }
    }
}
