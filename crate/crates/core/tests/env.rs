use std::sync::Arc;

use pilot_core::env::*;
use pilot_core::fixtures::builtin_world;
use proptest::prelude::*;

fn synthshop() -> Arc<WorldSpec> {
    builtin_world("synthshop").unwrap().unwrap()
}

fn click(id: u32) -> Action {
    Action::Click { element_id: ElementId(id) }
}

fn t3_actions() -> Vec<Action> {
    vec![
        Action::Type { element_id: ElementId(1), text: "usb hub".into() },
        click(2),
        click(12),
        Action::Select { element_id: ElementId(23), option: "White".into() },
        click(25),
        click(26),
    ]
}

#[test]
fn fixture_shape() {
    let s = synthshop();
    assert_eq!(s.pages.len(), 4);
    assert_eq!(s.element_count(), 37);
    for name in pilot_core::fixtures::builtin_names() {
        builtin_world(name).unwrap().unwrap();
    }
    assert!(builtin_world("nope").is_none());
}

#[test]
fn replaying_the_reference_actions_meets_the_goal() {
    let s = synthshop();
    let task = s.task("T3").unwrap().clone();
    let mut world = World::new(Arc::clone(&s), 0);
    world.reset(&task).unwrap();
    for a in t3_actions() {
        let out = world.step(&a).unwrap();
        assert!(!out.failed, "{a}: {}", out.note);
    }
    assert!(world.check_goal(&task, None));
    assert_eq!(world.goal_progress(&task, None), 3);

    world.reset(&task).unwrap();
    let actions = t3_actions();
    for a in &actions[..actions.len() - 1] {
        world.step(a).unwrap();
    }
    assert!(!world.check_goal(&task, None));
    assert_eq!(world.state().current_page, "product");
}

#[test]
fn check_goal_is_pure() {
    let s = synthshop();
    let task = s.task("T3").unwrap().clone();
    let mut world = World::new(Arc::clone(&s), 0);
    world.reset(&task).unwrap();
    world.step(&t3_actions()[0]).unwrap();
    let before = world.state().clone();
    for _ in 0..3 {
        world.check_goal(&task, Some("x"));
    }
    assert_eq!(world.state(), &before);
}

#[test]
fn typing_into_a_button_is_a_noted_no_op() {
    let s = synthshop();
    let task = s.task("T3").unwrap().clone();
    let mut world = World::new(Arc::clone(&s), 0);
    world.reset(&task).unwrap();
    let before = world.state().clone();
    let out = world
        .step(&Action::Type { element_id: ElementId(2), text: "hello".into() })
        .unwrap();
    assert!(out.failed && !out.changed && !out.terminal);
    assert!(out.note.contains("not an input"));
    let mut expected = before;
    expected.step_count += 1;
    assert_eq!(world.state(), &expected);

    let out = world.step(&click(25)).unwrap();
    assert!(out.failed && out.note.contains("not on the current page"));
}

#[test]
fn home_page_renders_one_line_per_element() {
    let s = synthshop();
    let mut world = World::new(Arc::clone(&s), 0);
    let obs = world.reset(&s.tasks[0]).unwrap();
    let golden = "\
[0] static_text SynthShop
[1] input Search
[2] button Go
[3] link Cart
[4] link Deals
[5] select Language (English)
[6] static_text Free shipping over $50
[7] link Help
[8] button Sign in
[9] static_text Top picks";
    assert_eq!(obs.tree_text, golden);
    assert_eq!(obs.page_id, "home");
    assert_eq!(obs.visible_window, (0, 10));
    assert_eq!(obs.render(), format!("page: home\n{golden}"));
}

#[test]
fn stop_ends_the_episode() {
    let s = synthshop();
    let mut world = World::new(Arc::clone(&s), 0);
    world.reset(&s.tasks[0]).unwrap();
    let out = world.step(&Action::Stop { answer: "done".into() }).unwrap();
    assert!(out.terminal);
    assert_eq!(world.answer(), Some("done"));
    assert!(matches!(world.step(&click(1)), Err(EnvError::EpisodeOver)));
}

fn tall_world(rows: u32, window: usize) -> Arc<WorldSpec> {
    let children: Vec<Element> = (1..rows)
        .map(|i| Element {
            element_id: ElementId(i),
            kind: ElementKind::Button,
            label: format!("b{i}"),
            value: String::new(),
            options: vec![],
            target: None,
            children: vec![],
        })
        .collect();
    let spec = WorldSpec {
        name: "tall".into(),
        start_page: "p".into(),
        scroll_window: window,
        pages: vec![Page {
            page_id: "p".into(),
            topic: vec![],
            root: Element {
                element_id: ElementId(0),
                kind: ElementKind::StaticText,
                label: "top".into(),
                value: String::new(),
                options: vec![],
                target: None,
                children,
            },
            scroll_offset: 0,
        }],
        lookup_tables: Default::default(),
        tasks: vec![Task {
            task_id: "t".into(),
            instruction: "press b9".into(),
            goal: vec![GoalCondition::ElementClicked(ElementId(9))],
            domain_tag: "test".into(),
            difficulty: Difficulty::Easy,
            reference_plan: vec![],
        }],
        plan_templates: vec![],
    };
    spec.validate().unwrap();
    Arc::new(spec)
}

#[test]
fn scrolling_clamps_and_gates_visibility() {
    let s = tall_world(12, 5);
    let mut world = World::new(Arc::clone(&s), 0);
    world.reset(&s.tasks[0]).unwrap();
    let out = world.step(&click(9)).unwrap();
    assert!(out.failed && out.note.contains("not visible"));

    let out = world.step(&Action::Scroll { direction: ScrollDirection::Down, amount: 100 }).unwrap();
    assert_eq!(out.observation.visible_window, (7, 12));
    let out = world.step(&Action::Scroll { direction: ScrollDirection::Down, amount: 1 }).unwrap();
    assert!(!out.changed);
    assert!(!world.step(&click(9)).unwrap().failed);
    assert!(world.check_goal(&s.tasks[0], None));

    let out = world.step(&Action::Scroll { direction: ScrollDirection::Up, amount: 100 }).unwrap();
    assert_eq!(out.observation.visible_window, (0, 5));
}

fn any_action() -> impl Strategy<Value = Action> {
    let id = (0u32..40).prop_map(ElementId);
    let text = prop::sample::select(vec!["usb hub", "White", "Black", "SAVE10", "", "x"]).prop_map(String::from);
    prop_oneof![
        id.clone().prop_map(|element_id| Action::Click { element_id }),
        (id.clone(), text.clone()).prop_map(|(element_id, text)| Action::Type { element_id, text }),
        (id, text.clone()).prop_map(|(element_id, option)| Action::Select { element_id, option }),
        (prop::bool::ANY, 0u32..30).prop_map(|(down, amount)| Action::Scroll {
            direction: if down { ScrollDirection::Down } else { ScrollDirection::Up },
            amount,
        }),
        text.prop_map(|answer| Action::Stop { answer }),
    ]
}

fn run(seed: u64, actions: &[Action]) -> (Vec<(Observation, bool, String)>, WorldState) {
    let s = synthshop();
    let mut world = World::new(Arc::clone(&s), seed);
    world.reset(s.task("T3").unwrap()).unwrap();
    let mut trace = Vec::new();
    for a in actions {
        match world.step(a) {
            Ok(o) => trace.push((o.observation, o.changed, o.note)),
            Err(_) => break,
        }
    }
    (trace, world.state().clone())
}

proptest! {
    #[test]
    fn same_seed_same_actions_same_trace(seed in any::<u64>(), actions in prop::collection::vec(any_action(), 0..25)) {
        prop_assert_eq!(run(seed, &actions), run(seed, &actions));
    }

    #[test]
    fn actions_round_trip_through_json(a in any_action()) {
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<Action>(&json).unwrap(), a);
    }
}
