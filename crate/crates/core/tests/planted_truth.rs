//! The generator is learnable: with stationary preferences and enough
//! history, content filtering finds each user's truly preferred listings.

use std::collections::BTreeMap;

use proprec::content::{build_content_snapshot, recommend_content, ContentTraining, Horizon};
use proprec::datagen::{World, WorldParams};
use proprec::domain::{InteractionEvent, ListingType, Property, SearchFilter, Span, UserId};
use proprec::features::FeatureSpace;

fn stationary_world() -> World {
    let mut p = WorldParams::sized(3_000, 400, Span::days(1), 11);
    p.sessions.sessions_per_day = 24.0;
    p.sessions.rate_sigma = 0.0;
    p.sessions.mean_views = 6.0;
    World::generate(p)
}

#[test]
fn top_one_lands_in_true_top_decile() {
    let world = stationary_world();
    let index = world.index();
    let mut by_user: BTreeMap<&UserId, Vec<&InteractionEvent>> = BTreeMap::new();
    for e in &world.events {
        by_user.entry(&e.user_id).or_default().push(e);
    }
    let window = (world.params.start, world.end());
    let (mut hits, mut judged) = (0, 0);
    for lt in ListingType::ALL {
        let space = FeatureSpace::new(lt, world.params.bins.clone());
        let props: Vec<&Property> = world.properties.iter().filter(|p| p.listing_type == lt && p.active).collect();
        let params = ContentTraining { horizon: Horizon::ShortTerm, window, built_at: window.1, space: &space, min_distinct_properties: 0 };
        let snap = build_content_snapshot(&world.events, &props, &params);
        for user in world.users.iter().filter(|u| u.listing_type == lt) {
            if by_user.get(&user.user_id).map_or(0, Vec::len) < 50 {
                continue;
            }
            let home = &user.localities[0].0;
            let filter = SearchFilter::new(&user.city, home, lt).with_top_k(1);
            let Ok(top) = recommend_content(&user.user_id, &filter, &snap) else { continue };
            let converted = snap.converted.get(&user.user_id);
            let mut truth: Vec<f64> = index
                .in_locality(lt, home)
                .iter()
                .filter(|&&i| converted.is_none_or(|c| !c.contains(&world.properties[i].id)))
                .map(|&i| index.affinity(&user.preference, i))
                .collect();
            truth.sort_by(|a, b| b.total_cmp(a));
            let threshold = truth[truth.len().div_ceil(10) - 1];
            let chosen = world.properties.iter().position(|p| p.id == top[0].property_id).unwrap();
            judged += 1;
            if index.affinity(&user.preference, chosen) >= threshold - 1e-12 {
                hits += 1;
            }
        }
    }
    let rate = hits as f64 / judged as f64;
    println!("top-decile hit rate {rate:.3} over {judged} users");
    assert!(judged >= 100, "only {judged} users had 50 events");
    assert!(rate >= 0.8, "hit rate {rate:.3}");
}

#[test]
fn most_interacted_listing_shares_the_anchor_features() {
    let world = stationary_world();
    let index = world.index();
    let mut counts: BTreeMap<(&UserId, &str), usize> = BTreeMap::new();
    for e in &world.events {
        *counts.entry((&e.user_id, e.property_id.as_str())).or_default() += 1;
    }
    let mut favourite: BTreeMap<&UserId, (&str, usize)> = BTreeMap::new();
    for (&(u, p), &n) in &counts {
        let f = favourite.entry(u).or_insert((p, n));
        if n > f.1 {
            *f = (p, n);
        }
    }
    let ids: BTreeMap<&str, usize> = world.properties.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let (mut above, mut total) = (0, 0);
    for user in &world.users {
        let Some(&(p, _)) = favourite.get(&user.user_id) else { continue };
        let fav = index.affinity(&user.preference, ids[p]);
        let pool = index.in_locality(user.listing_type, &world.properties[ids[p]].locality);
        let mean = pool.iter().map(|&i| index.affinity(&user.preference, i)).sum::<f64>() / pool.len() as f64;
        total += 1;
        if fav > mean {
            above += 1;
        }
    }
    assert!(above as f64 >= 0.9 * total as f64, "{above}/{total}");
}
