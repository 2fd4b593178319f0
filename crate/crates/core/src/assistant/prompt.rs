use crate::catalog::Catalog;

pub const PLANNER_PREAMBLE: &str =
    "You are a helpful assistant given a set of AI models to complete the user's task.";

pub const CRITERIA: &str = "Here are four criteria that the answer needs to satisfy. \
If any criteria are not satisfied, please give me the corrected answer in JSON format.
1. Whether the user's task was understood and completed.
2. Whether no models outside of the provided ones were used.
3. Whether the output and input of each step can be connected.
4. Whether it follows the correct JSON format.";

/// Shown to the planner as the answer format.
pub const EXAMPLE_ANSWER: &str = r#"{"steps":[{"model":"describe_image","inputs":["user:image"],"parameters":{}},{"model":"ask_gpt","inputs":["prev"],"parameters":{"mode":"translation","target_modality":"audio"}},{"model":"generate_sound_effects","inputs":[1],"parameters":{}}]}"#;

/// English words for `0..=999`.
pub fn number_words(n: u32) -> String {
    const ONES: [&str; 20] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
        "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    ];
    const TENS: [&str; 10] =
        ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];
    assert!(n < 1000, "number_words supports 0..=999");
    match n {
        0..=19 => ONES[n as usize].to_string(),
        20..=99 if n.is_multiple_of(10) => TENS[(n / 10) as usize].to_string(),
        20..=99 => format!("{}-{}", TENS[(n / 10) as usize], ONES[(n % 10) as usize]),
        _ if n.is_multiple_of(100) => format!("{} hundred", ONES[(n / 100) as usize]),
        _ => format!("{} hundred {}", ONES[(n / 100) as usize], number_words(n % 100)),
    }
}

/// The numbered model list: `1. ask_gpt() has reasoning capability. 2. ...`
pub fn model_list(catalog: &Catalog) -> (usize, String) {
    let entries: Vec<String> = catalog
        .model_table()
        .enumerate()
        .map(|(i, spec)| format!("{}. {}() {}.", i + 1, spec.spec_id, spec.capability))
        .collect();
    (entries.len(), entries.join(" "))
}

pub fn planner_prompt(catalog: &Catalog, task: &str) -> String {
    let (count, list) = model_list(catalog);
    let task = task.trim();
    let task = task.strip_suffix('.').unwrap_or(task);
    format!(
        "{PLANNER_PREAMBLE}\n\
         There are {} models: {list}\n\
         You can only use the models given. You do not have to use all the models.\n\
         You will answer in a JSON format. Here is an example answer: {EXAMPLE_ANSWER}.\n\
         Your task is to {task}.",
        number_words(count as u32)
    )
}

pub fn critique_prompt(planner_prompt: &str, answer: &str) -> String {
    format!("{planner_prompt}\n{}\n{CRITERIA}", answer.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words() {
        assert_eq!(number_words(39), "thirty-nine");
        assert_eq!(number_words(40), "forty");
        assert_eq!(number_words(7), "seven");
        assert_eq!(number_words(115), "one hundred fifteen");
    }

    #[test]
    fn planner_lists_thirty_nine() {
        let p = planner_prompt(&Catalog::load_builtin(), "Add sound effects for an illustration.");
        assert!(p.contains("There are thirty-nine models: 1. ask_gpt() has reasoning capability. 2. generate_image() can generate an image from text."));
        assert!(p.contains(" 39. generate_artwork_from_text_and_sketch() "));
        assert!(!p.contains(" 40. "));
        assert!(p.ends_with("Your task is to Add sound effects for an illustration."));
    }
}
