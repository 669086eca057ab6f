use avkit::prompting::{
    build_explanation_prompt, build_fewshot_eval_prompt, build_instruction, Demonstration, PromptOptions, Prompter,
    TemplateSet,
};
use avkit::types::{AVPair, ClassificationLabel, DatasetSetting, LinguisticFeature};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    let body = std::fs::read_to_string(path).unwrap();
    body.strip_suffix('\n').unwrap_or(&body).to_string()
}

fn pair(id: &str, t1: &str, t2: &str, label: ClassificationLabel) -> AVPair {
    AVPair::new(id, t1, t2, label).unwrap()
}

fn demos() -> Vec<Demonstration> {
    vec![
        Demonstration {
            pair: pair("d1", "Demo one, first text.", "Demo one, second text.", ClassificationLabel::SameAuthor),
            label: ClassificationLabel::SameAuthor,
            explanation: "The correct answer is yes. Both texts use short declarative sentences.".into(),
        },
        Demonstration {
            pair: pair("d2", "demo two first text", "Demo Two: Second Text!", ClassificationLabel::DifferentAuthor),
            label: ClassificationLabel::DifferentAuthor,
            explanation: "The correct answer is no. Text 1 avoids capitals while Text 2 capitalizes every word."
                .into(),
        },
    ]
}

fn query() -> AVPair {
    pair(
        "q",
        "Terrible service. Never again.",
        "the food was ok i guess, nothing special lol",
        ClassificationLabel::DifferentAuthor,
    )
}

#[test]
fn explanation_prompt_without_demonstrations() {
    let p = pair(
        "x",
        "I love this movie!! Best thing I've seen all year.",
        "This film was great, truly. Go see it!!",
        ClassificationLabel::SameAuthor,
    );
    let prompt = build_explanation_prompt(&p, ClassificationLabel::SameAuthor, &[]).unwrap();
    assert_eq!(prompt, golden("explanation_same_nodemo.txt"));
}

#[test]
fn explanation_prompt_with_demonstrations() {
    let prompt = build_explanation_prompt(&query(), ClassificationLabel::DifferentAuthor, &demos()).unwrap();
    assert_eq!(prompt, golden("explanation_diff_twodemos.txt"));
}

#[test]
fn explanation_prompt_lists_every_feature_once_in_order() {
    let prompt = build_explanation_prompt(&query(), ClassificationLabel::SameAuthor, &[]).unwrap();
    let mut last = 0;
    for f in LinguisticFeature::ALL {
        let line = format!("\n{}. {}.\n", f.number(), f.checklist_name());
        let pos = prompt.find(&line).unwrap_or_else(|| panic!("missing {line:?}"));
        assert_eq!(prompt.matches(&line).count(), 1);
        assert!(pos > last);
        last = pos;
    }
}

#[test]
fn instruction_golden() {
    assert_eq!(
        build_instruction(&query(), DatasetSetting::ClassificationAndExplanation),
        golden("instruction_cls_expl.txt")
    );
    let cls = build_instruction(&query(), DatasetSetting::ClassificationOnly);
    assert!(!cls.contains("Then, provide an analysis"));
    assert!(cls.contains("Text 1: Terrible service. Never again."));
}

#[test]
fn fewshot_golden() {
    let pool: Vec<(AVPair, ClassificationLabel)> = demos().into_iter().map(|d| (d.pair, d.label)).collect();
    let prompt = build_fewshot_eval_prompt(&query(), &pool, 2).unwrap();
    assert_eq!(prompt, golden("fewshot_k2.txt"));
}

#[test]
fn template_directory_matches_builtin() {
    let dir = format!("{}/templates", env!("CARGO_MANIFEST_DIR"));
    let from_disk = Prompter::new(TemplateSet::load_dir(dir).unwrap(), PromptOptions::default());
    let builtin = Prompter::default();
    let q = query();
    assert_eq!(
        from_disk.explanation_prompt(&q, q.label, &demos()).unwrap(),
        builtin.explanation_prompt(&q, q.label, &demos()).unwrap()
    );
}
