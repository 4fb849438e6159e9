use super::{LayoutError, TaskSpec};

/// The shipped task files, as `(name, file contents)`.
pub const BUILTIN_TASKS: &[(&str, &str)] = &[
    ("Coffee", include_str!("../../layouts/coffee.toml")),
    ("CoffeeMail", include_str!("../../layouts/coffee_mail.toml")),
    ("Collecting", include_str!("../../layouts/collecting.toml")),
    ("Bonus", include_str!("../../layouts/bonus.toml")),
    ("Plant", include_str!("../../layouts/plant.toml")),
    ("Bridge", include_str!("../../layouts/bridge.toml")),
    ("Bed", include_str!("../../layouts/bed.toml")),
    ("Gem", include_str!("../../layouts/gem.toml")),
];

pub fn builtin_task_names() -> Vec<&'static str> {
    BUILTIN_TASKS.iter().map(|(name, _)| *name).collect()
}

/// Loads a shipped task by name (case-insensitive).
pub fn builtin_task(name: &str) -> Result<TaskSpec, LayoutError> {
    let (_, text) = BUILTIN_TASKS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| LayoutError::Parse(format!("no built-in task named {name:?}")))?;
    TaskSpec::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_env;

    #[test]
    fn every_builtin_task_builds() {
        for name in builtin_task_names() {
            let spec = builtin_task(name).unwrap();
            assert_eq!(spec.name(), name);
            let env = build_env(spec, 0).unwrap();
            assert_eq!(env.label(env.layout().start()).unwrap(), None);
        }
    }

    #[test]
    fn vocabularies_follow_file_order() {
        let names = |task: &str| builtin_task(task).unwrap().vocabulary().names().to_vec();
        assert_eq!(names("Coffee"), ["c", "o"]);
        assert_eq!(names("CoffeeMail"), ["c", "m", "o"]);
        assert_eq!(
            names("Gem"),
            ["wood", "workbench", "iron", "toolshed", "axe"]
        );
    }

    #[test]
    fn coffee_vocabulary_is_exactly_its_label_cells() {
        let spec = builtin_task("Coffee").unwrap();
        let layout = spec.layout();
        let mut labelled: Vec<_> = layout
            .open_cells()
            .into_iter()
            .filter_map(|c| layout.label_at(c))
            .collect();
        labelled.sort();
        labelled.dedup();
        assert_eq!(labelled, spec.vocabulary().subtasks());
    }

    #[test]
    fn step_caps_default_per_domain() {
        assert_eq!(builtin_task("Collecting").unwrap().step_cap(), 1000);
        assert_eq!(builtin_task("Bed").unwrap().step_cap(), 2000);
    }

    #[test]
    fn walled_office_is_rejected() {
        use crate::env::Cell;
        let spec = builtin_task("Coffee").unwrap();
        let o = spec.vocabulary().lookup("o").unwrap();
        let office = spec.layout().cells_of(o)[0];
        let mut layout = spec.layout().clone();
        for a in crate::env::Action::ALL {
            let n = layout.move_from(office, a);
            if n != office {
                layout = layout.with_cell(n, Cell::Wall);
            }
        }
        let err = build_env(spec.with_layout(layout), 0).unwrap_err();
        assert!(err.to_string().contains("unreachable label cell"), "{err}");
    }
}
