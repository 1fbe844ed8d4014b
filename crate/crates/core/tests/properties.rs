//! Property tests for cross-module invariants.

use std::collections::{BTreeMap, BTreeSet};

use bimpilot::actions::{execute_script, parse_script, serialize_script, Action, ActionScript, NoHooks};
use bimpilot::bench::percentages;
use bimpilot::design::{
    apply_modifications, interpret_floorplan, render_sketch, segment_sketch, synthesize_floorplan, DesignTask,
    Footprint, LocationHint, Modality, Modification,
};
use bimpilot::document::ElementKind;
use bimpilot::env::{
    layout, new_session, text_origin, DialogKind, EnvFlag, EnvState, FaultConfig, InputEvent, WidgetRole,
    ORGANIZATION_COMBO, SLAB_COMBO, WALL_COMBO,
};
use bimpilot::floorplan::{FloorplanModel, WallKind};
use bimpilot::geometry::{map_to_gui, map_to_image, CanvasGeometry, GuiPoint, ImagePoint};
use bimpilot::grounding::{build_set_of_marks, frame_diff, ocr_raster, ocr_text, MarkScope};
use bimpilot::planning::{plan_components, plan_high_level, plan_low_level, retrieve_for, StepClass, SubStepKind};
use bimpilot::raster::{font, BLACK, CHAR_ADVANCE, WHITE};
use bimpilot::retrieval::DocIndex;
use proptest::prelude::*;

fn env() -> EnvState {
    new_session(CanvasGeometry::default(), FaultConfig::default())
}

fn footprint() -> impl Strategy<Value = Footprint> {
    prop_oneof![
        Just(Footprint::Rectangle),
        Just(Footprint::LShape),
        Just(Footprint::HShape),
        Just(Footprint::Hexagon),
        Just(Footprint::Octagon),
    ]
}

fn task(footprint: Footprint, storeys: u32, rooms: u32) -> DesignTask {
    DesignTask {
        id: "p".into(),
        modality: Modality::TextOnly,
        footprint,
        storeys,
        rooms,
        modifications: vec![],
        prose: "A house.".into(),
    }
}

fn geometry() -> impl Strategy<Value = CanvasGeometry> {
    (64u32..2048, 64u32..2048, 64u32..1200, 64u32..800, 0u32..300, 0u32..200).prop_map(|(wi, hi, wg, hg, ox, oy)| {
        CanvasGeometry { w_img: wi, h_img: hi, w_gui: wg, h_gui: hg, origin_x: ox, origin_y: oy }
    })
}

fn charset() -> Vec<char> {
    font().charset().collect()
}

fn typed_text(max: usize) -> impl Strategy<Value = String> {
    let cs = charset();
    prop::collection::vec(0..cs.len(), 0..=max).prop_map(move |ix| ix.into_iter().map(|i| cs[i]).collect())
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0i32..1280, 0i32..800).prop_map(|(x, y)| Action::MoveMouseTo { x, y }),
        Just(Action::LeftClick),
        Just(Action::PressEscape),
        Just(Action::PressEnter),
        Just(Action::SelectAll),
        prop::sample::select(vec!["9", "alt+shift+2", "shift+d", "alt+shift+d", "ctrl+alt+shift+1", "ctrl+shift+o"])
            .prop_map(|c| Action::Shortcut(c.into())),
        typed_text(12).prop_map(Action::TypeName),
    ]
}

/// Events that stay on the canvas, toolbar and dialog buttons.
fn event() -> impl Strategy<Value = InputEvent> {
    prop_oneof![
        3 => (160i32..1120, 80i32..720).prop_map(|(x, y)| InputEvent::MouseMove(GuiPoint::new(x, y))),
        3 => Just(InputEvent::LeftClick),
        1 => Just(InputEvent::KeyEnter),
        1 => Just(InputEvent::KeyEscape),
        1 => Just(InputEvent::SelectAll),
        1 => "[a-z0-9]{0,4}".prop_map(InputEvent::KeyText),
        2 => prop::sample::select(vec!["9", "alt+shift+2", "shift+d", "alt+shift+d", "ctrl+alt+shift+1", "ctrl+shift+o"])
            .prop_map(|c| InputEvent::KeyCombo(c.into())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mapping_is_monotone_contained_and_round_trips(g in geometry(), a in (0.0..1.0f64, 0.0..1.0f64), b in (0.0..1.0f64, 0.0..1.0f64)) {
        let p = ImagePoint::new(a.0 * g.w_img as f64, a.1 * g.h_img as f64);
        let q = ImagePoint::new(b.0 * g.w_img as f64, b.1 * g.h_img as f64);
        let (gp, gq) = (map_to_gui(p, &g).unwrap(), map_to_gui(q, &g).unwrap());
        prop_assert!(g.contains_gui(&gp) && g.contains_gui(&gq));
        if p.x < q.x { prop_assert!(gp.x <= gq.x); }
        if p.y < q.y { prop_assert!(gp.y <= gq.y); }
        let back = map_to_image(gp, &g).unwrap();
        prop_assert!((back.x - p.x).abs() <= 0.5 * g.w_img as f64 / g.w_gui as f64 + 1e-9);
        prop_assert!((back.y - p.y).abs() <= 0.5 * g.h_img as f64 / g.h_gui as f64 + 1e-9);
    }

    #[test]
    fn largest_remainder_shares_sum_to_hundred(counts in prop::collection::vec(0u64..1000, 1..6)) {
        let shares = percentages(&counts);
        let total: u64 = counts.iter().sum();
        if total > 0 {
            prop_assert!((shares.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            for (c, s) in counts.iter().zip(&shares) {
                prop_assert!((s - *c as f64 * 100.0 / total as f64).abs() <= 0.01 + 1e-9);
            }
        } else {
            prop_assert!(shares.iter().all(|s| *s == 0.0));
        }
    }

    #[test]
    fn scripts_round_trip(actions in prop::collection::vec(action(), 1..16)) {
        let s = ActionScript::new(actions);
        let text = serialize_script(&s);
        let back = parse_script(&text).unwrap();
        prop_assert_eq!(&back.actions, &s.actions);
        prop_assert_eq!(serialize_script(&back), text);
    }

    #[test]
    fn ocr_reads_any_supported_text(text in typed_text(24), x in 0i64..900, y in 0i64..700) {
        let text = text.trim_end().to_string();
        let mut r = bimpilot::raster::Raster::new(1280, 800, WHITE);
        r.draw_text(x, y, &text, BLACK);
        let w = (text.chars().count().max(1) * CHAR_ADVANCE) as i32 + 8;
        let bbox = bimpilot::env::Rect::new(x as i32 - 4, y as i32 - 3, x as i32 - 4 + w, y as i32 + 16);
        prop_assume!(text_origin(&bbox) == (x as i32, y as i32));
        prop_assert_eq!(ocr_raster(&r, bbox), text);
    }

    #[test]
    fn frame_diff_is_sound_and_complete(
        pixels in prop::collection::vec((0usize..1280, 0usize..800, any::<[u8; 3]>()), 1..20),
    ) {
        let a = env().render();
        let mut b = a.clone();
        for (x, y, c) in &pixels {
            b.raster.set(*x, *y, *c);
        }
        match frame_diff(&a, &b).unwrap() {
            None => prop_assert_eq!(&a.raster, &b.raster),
            Some(d) => {
                let r = d.bbox;
                let differs = |x: i32, y: i32| a.raster.get(x as usize, y as usize) != b.raster.get(x as usize, y as usize);
                for y in 0..800i32 {
                    for x in 0..1280i32 {
                        if !r.contains(x, y) {
                            prop_assert!(!differs(x, y));
                        }
                    }
                }
                prop_assert!((r.x0..=r.x1).any(|x| differs(x, r.y0)));
                prop_assert!((r.x0..=r.x1).any(|x| differs(x, r.y1)));
                prop_assert!((r.y0..=r.y1).any(|y| differs(r.x0, y)));
                prop_assert!((r.y0..=r.y1).any(|y| differs(r.x1, y)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn env_is_deterministic_and_only_grows(events in prop::collection::vec(event(), 1..60), seed in any::<u64>()) {
        let fault = FaultConfig { click_offset_prob: 0.2, offset_magnitude: 12, key_drop_prob: 0.2, seed };
        let (mut a, mut b) = (new_session(CanvasGeometry::default(), fault), new_session(CanvasGeometry::default(), fault));
        let mut count = 0;
        for ev in &events {
            a.apply_event(ev);
            b.apply_event(ev);
            prop_assert_eq!(a.frame_fingerprint(), b.frame_fingerprint());
            prop_assert!(a.document.elements.len() >= count);
            count = a.document.elements.len();
        }
        prop_assert_eq!(a.export_document(), b.export_document());
        prop_assert_eq!(a.render().hash(), b.render().hash());
        let census = a.document.census();
        prop_assert_eq!(census.total.values().sum::<usize>(), a.document.elements.len());
    }

    #[test]
    fn fault_draws_depend_only_on_seed_and_index(
        first in prop::collection::vec(event(), 1..40),
        second in prop::collection::vec(event(), 1..40),
        seed in any::<u64>(),
    ) {
        let fault = FaultConfig { click_offset_prob: 0.3, offset_magnitude: 12, key_drop_prob: 0.0, seed };
        let faults = |events: &[InputEvent]| -> BTreeMap<usize, EnvFlag> {
            let mut e = new_session(CanvasGeometry::default(), fault);
            let mut out = BTreeMap::new();
            for (i, ev) in events.iter().enumerate() {
                let before = e.flags.len();
                e.apply_event(ev);
                if let Some(f) = e.flags[before..].iter().find(|f| f.is_fault()) {
                    out.insert(i, f.clone());
                }
            }
            out
        };
        let (fa, fb) = (faults(&first), faults(&second));
        for (i, (x, y)) in first.iter().zip(&second).enumerate() {
            if *x == InputEvent::LeftClick && *y == InputEvent::LeftClick {
                prop_assert_eq!(fa.get(&i), fb.get(&i));
            }
        }
    }

    #[test]
    fn typed_field_values_read_back(text in typed_text(16)) {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo(ORGANIZATION_COMBO.into()));
        e.apply_event(&InputEvent::MouseMove(layout::button_center(DialogKind::Organization, "New...")));
        e.apply_event(&InputEvent::LeftClick);
        e.apply_event(&InputEvent::SelectAll);
        e.apply_event(&InputEvent::KeyText(text));
        let f = e.render();
        for w in f.widgets.iter().filter(|w| w.role == WidgetRole::TextField) {
            prop_assert_eq!(&ocr_text(&f, w.bbox), w.value.trim_end());
        }
    }

    #[test]
    fn region_scoping_never_grows(events in prop::collection::vec(event(), 0..30)) {
        let mut e = env();
        for ev in &events {
            e.apply_event(ev);
        }
        let before = e.render();
        e.apply_event(&InputEvent::KeyCombo(ORGANIZATION_COMBO.into()));
        let after = e.render();
        let full = build_set_of_marks(&after, MarkScope::FullScreen);
        if let Some(d) = frame_diff(&before, &after).unwrap() {
            let scoped = build_set_of_marks(&after, MarkScope::Region(d));
            prop_assert!(scoped.elements.len() <= full.elements.len());
            for m in &scoped.elements {
                prop_assert!(full.elements.iter().any(|f| f.bbox == m.bbox && f.role == m.role));
            }
        }
    }

    #[test]
    fn replaying_a_script_gives_identical_traces(actions in prop::collection::vec(action(), 1..20), seed in any::<u64>()) {
        let fault = FaultConfig { click_offset_prob: 0.2, offset_magnitude: 12, key_drop_prob: 0.2, seed };
        let s = ActionScript::new(actions);
        let mut a = new_session(CanvasGeometry::default(), fault);
        let mut b = new_session(CanvasGeometry::default(), fault);
        let (ta, tb) = (execute_script(&s, &mut a, &mut NoHooks), execute_script(&s, &mut b, &mut NoHooks));
        prop_assert_eq!(ta.hash(), tb.hash());
    }

    #[test]
    fn slab_iff_picked_walls_form_one_cycle(picks in prop::sample::subsequence((0..12usize).collect::<Vec<_>>(), 1..=8), order in any::<u64>()) {
        // A 2x2 grid of 100 px cells: 12 unit edges.
        let node = |i: i32, j: i32| (300 + 100 * i, 200 + 100 * j);
        let mut edges = Vec::new();
        for j in 0..3 {
            for i in 0..2 {
                edges.push((node(i, j), node(i + 1, j)));
            }
        }
        for i in 0..3 {
            for j in 0..2 {
                edges.push((node(i, j), node(i, j + 1)));
            }
        }
        let mut e = env();
        for (a, b) in &edges {
            let s = format!("shortcut(combo='{WALL_COMBO}'), move_mouse_to({},{}), left_click(), move_mouse_to({},{}), left_click(), press_enter()", a.0, a.1, b.0, b.1);
            execute_script(&parse_script(&s).unwrap(), &mut e, &mut NoHooks);
        }
        prop_assert_eq!(e.document.census().count(ElementKind::Wall), 12);
        let mut picks = picks;
        let k = picks.len();
        picks.rotate_left((order % k as u64) as usize);
        e.apply_event(&InputEvent::KeyCombo(SLAB_COMBO.into()));
        for &p in &picks {
            let (a, b) = edges[p];
            e.apply_event(&InputEvent::MouseMove(GuiPoint::new((a.0 + b.0) / 2, (a.1 + b.1) / 2)));
            e.apply_event(&InputEvent::LeftClick);
        }
        e.apply_event(&InputEvent::KeyEnter);
        // Oracle: every endpoint has degree two and the picked edges are connected.
        let mut degree: BTreeMap<(i32, i32), usize> = BTreeMap::new();
        for &p in &picks {
            *degree.entry(edges[p].0).or_default() += 1;
            *degree.entry(edges[p].1).or_default() += 1;
        }
        let mut seen = BTreeSet::from([edges[picks[0]].0]);
        let mut grew = true;
        while grew {
            grew = false;
            for &p in &picks {
                let (a, b) = edges[p];
                if seen.contains(&a) != seen.contains(&b) {
                    seen.insert(a);
                    seen.insert(b);
                    grew = true;
                }
            }
        }
        let cycle = degree.values().all(|d| *d == 2) && seen.len() == degree.len();
        prop_assert_eq!(e.document.census().count(ElementKind::Slab) == 1, cycle, "picks {:?}", picks);
    }
}

fn scaled(fp: &FloorplanModel, k: f64) -> FloorplanModel {
    let mut out = fp.clone();
    out.canvas.w_img = (fp.canvas.w_img as f64 * k) as u32;
    out.canvas.h_img = (fp.canvas.h_img as f64 * k) as u32;
    for w in &mut out.walls {
        w.start = ImagePoint::new(w.start.x * k, w.start.y * k);
        w.end = ImagePoint::new(w.end.x * k, w.end.y * k);
    }
    out.rooms.clear();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesis_is_valid_and_reproducible(f in footprint(), storeys in 1u32..=3, rooms in 1u32..=6, seed in 0u64..1000) {
        let t = task(f, storeys, rooms);
        if let Ok(fp) = synthesize_floorplan(&t, seed) {
            prop_assert_eq!(fp.validate(), vec![]);
            prop_assert_eq!(fp.rooms.len(), rooms as usize);
            let again = synthesize_floorplan(&t, seed).unwrap();
            prop_assert_eq!(fp.to_canonical_json(), again.to_canonical_json());
        }
    }

    #[test]
    fn adding_a_room_keeps_the_plan_valid(f in footprint(), rooms in 1u32..=4, seed in 0u64..100) {
        let Ok(fp) = synthesize_floorplan(&task(f, 1, rooms), seed) else { return Ok(()) };
        if let Ok(more) = apply_modifications(&fp, &[Modification::AddRoom(LocationHint::Largest)]) {
            prop_assert_eq!(more.validate(), vec![]);
            prop_assert_eq!(more.rooms.len(), fp.rooms.len() + 1);
        }
    }

    #[test]
    fn interpretation_survives_raster_round_trip_and_scaling(
        f in prop_oneof![Just(Footprint::Rectangle), Just(Footprint::LShape), Just(Footprint::HShape)],
        rooms in 1u32..=5,
        seed in 0u64..100,
    ) {
        let Ok(fp) = synthesize_floorplan(&task(f, 1, rooms), seed) else { return Ok(()) };
        let back = interpret_floorplan(&segment_sketch(&render_sketch(&fp)), fp.canvas, 1).unwrap();
        prop_assert_eq!(back.openings.len(), fp.openings.len());
        for (a, b) in back.walls.iter().zip(&fp.walls) {
            prop_assert!(a.start.dist(&b.start) <= 2.0 && a.end.dist(&b.end) <= 2.0);
        }
        let big = scaled(&fp, 2.0);
        let back2 = interpret_floorplan(&segment_sketch(&render_sketch(&big)), big.canvas, 1).unwrap();
        let kinds = |m: &FloorplanModel| m.walls.iter().map(|w| w.kind).collect::<Vec<WallKind>>();
        prop_assert_eq!(kinds(&back), kinds(&back2));
        let opening_kinds = |m: &FloorplanModel| m.openings.iter().map(|o| o.kind).collect::<Vec<_>>();
        prop_assert_eq!(opening_kinds(&back), opening_kinds(&back2));
    }

    #[test]
    fn plans_cover_every_component_in_order(f in footprint(), storeys in 1u32..=3, rooms in 1u32..=5, seed in 0u64..100) {
        let t = task(f, storeys, rooms);
        let Ok(fp) = synthesize_floorplan(&t, seed) else { return Ok(()) };
        let steps = plan_high_level(&t, &fp).unwrap();
        let mut covered: Vec<String> = steps.iter().flat_map(|s| s.components.clone()).collect();
        let n = covered.len();
        covered.sort();
        covered.dedup();
        prop_assert_eq!(covered.len(), n, "duplicate components");
        let mut expected = plan_components(&fp);
        expected.sort();
        prop_assert_eq!(covered, expected);

        let index = DocIndex::builtin();
        for s in 1..=storeys {
            let of: Vec<StepClass> = steps.iter().filter(|x| x.storey == s).map(|x| x.class).collect();
            let pos = |c: StepClass| of.iter().position(|x| *x == c);
            let last_wall = [pos(StepClass::ExternalWalls), pos(StepClass::InternalWalls)].into_iter().flatten().max();
            let first_opening = [pos(StepClass::Windows), pos(StepClass::Doors)].into_iter().flatten().min();
            if let (Some(w), Some(o)) = (last_wall, first_opening) {
                prop_assert!(w < o);
            }
            if let (Some(ext), Some(slab)) = (pos(StepClass::ExternalWalls), pos(StepClass::Slab)) {
                prop_assert!(ext < slab);
            }
        }
        for step in &steps {
            let docs = retrieve_for(&index, step.class, 3).unwrap();
            for sub in plan_low_level(step, &docs, &fp, &fp.canvas).unwrap() {
                if sub.kind == SubStepKind::PureAction {
                    let script = sub.actions.as_ref().unwrap();
                    let text = serialize_script(script);
                    prop_assert_eq!(&parse_script(&text).unwrap().actions, &script.actions);
                }
            }
        }
    }
}
