use mosaic_core::assistant::{critique_prompt, planner_prompt};
use mosaic_core::glue::{render_prompt, run_glue, GlueMode};
use mosaic_core::llm::EchoClient;
use mosaic_core::{BaseModality, Catalog};

#[test]
fn translation_prompt_is_byte_exact() {
    let mode = GlueMode::Translation {
        target_modality: BaseModality::Image,
        example_prompts: vec!["a cozy cabin, golden hour, 35mm".into(), "minimalist desk lamp, studio light".into()],
    };
    assert_eq!(render_prompt(&mode, "modern sofa").unwrap(), include_str!("golden/translation_image.txt"));
}

#[test]
fn ideation_prompt_is_byte_exact() {
    let mode = GlueMode::Ideation { task: "contemporary interior concept".into() };
    let rendered = render_prompt(&mode, "wooden ladder, loft, window, plant").unwrap();
    assert_eq!(rendered, include_str!("golden/ideation_interior.txt"));
}

#[test]
fn custom_prompt_is_instruction_then_input() {
    let mode = GlueMode::Custom { instruction: "summarize in 5 words".into() };
    assert_eq!(render_prompt(&mode, "a long text").unwrap(), "summarize in 5 words\na long text");
}

#[test]
fn planner_and_critique_prompts_are_byte_exact() {
    let catalog = Catalog::load_builtin();
    let planner = planner_prompt(&catalog, "help add music based on the image");
    assert_eq!(planner, include_str!("golden/planner_music.txt"));
    let critique = critique_prompt(&planner, include_str!("golden/critique_music_answer.txt"));
    assert_eq!(critique, include_str!("golden/critique_music.txt"));
}

#[test]
fn echo_client_returns_the_prompt_with_provenance() {
    let mode = GlueMode::Ideation { task: "a poster".into() };
    let value = run_glue(&mode, "a red fox", &EchoClient).unwrap();
    let prompt = render_prompt(&mode, "a red fox").unwrap();
    assert_eq!(value.as_text(), Some(prompt.as_str()));
    assert_eq!(value.provenance.prompt.as_deref(), Some(prompt.as_str()));
}
