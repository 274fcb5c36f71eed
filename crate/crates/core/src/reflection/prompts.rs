use std::path::Path;

use super::ReflectionError;

/// Prompt texts for the language stages. Placeholders are written as
/// `{name}` and filled with [`PromptTemplates::render`].
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub system: String,
    pub descriptor_scenes: String,
    pub descriptor_combine: String,
    pub evaluator: String,
    pub evaluator_positive: String,
    pub goal_selector: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            system: include_str!("../../prompts/system.txt").to_string(),
            descriptor_scenes: include_str!("../../prompts/descriptor_scenes.txt").to_string(),
            descriptor_combine: include_str!("../../prompts/descriptor_combine.txt").to_string(),
            evaluator: include_str!("../../prompts/evaluator.txt").to_string(),
            evaluator_positive: include_str!("../../prompts/evaluator_positive.txt").to_string(),
            goal_selector: include_str!("../../prompts/goal_selector.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads templates from a directory, using the built-in text for any
    /// file that is not present.
    pub fn load_dir(dir: &Path) -> Result<Self, ReflectionError> {
        let mut t = Self::default();
        let slots: [(&str, &mut String); 6] = [
            ("system.txt", &mut t.system),
            ("descriptor_scenes.txt", &mut t.descriptor_scenes),
            ("descriptor_combine.txt", &mut t.descriptor_combine),
            ("evaluator.txt", &mut t.evaluator),
            ("evaluator_positive.txt", &mut t.evaluator_positive),
            ("goal_selector.txt", &mut t.goal_selector),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path)
                    .map_err(|e| ReflectionError::Template(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(t)
    }

    /// Substitutes `{key}` placeholders. Unknown placeholders are left as is;
    /// a missing value for a placeholder the template uses is an error.
    pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, ReflectionError> {
        let mut out = template.to_string();
        for (key, value) in values {
            let needle = format!("{{{key}}}");
            if !out.contains(&needle) {
                return Err(ReflectionError::Template(format!("template has no {needle} placeholder")));
            }
            out = out.replace(&needle, value);
        }
        Ok(out)
    }
}
