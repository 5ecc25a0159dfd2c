use std::collections::BTreeMap;

use async_trait::async_trait;

use super::{Generated, GenerationError, GenerationRequest, Generator};
use crate::section::TargetSection;

/// Returns a fixed string per target.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    canned: BTreeMap<TargetSection, String>,
}

impl MockGenerator {
    pub fn new(canned: BTreeMap<TargetSection, String>) -> Self {
        MockGenerator { canned }
    }

    pub fn generate_sync(&self, req: &GenerationRequest) -> Result<Generated, GenerationError> {
        self.canned
            .get(&req.target)
            .map(Generated::new)
            .ok_or_else(|| {
                GenerationError::Config(format!(
                    "mock backend has no canned text for `{}`",
                    req.target
                ))
            })
    }
}

#[async_trait]
impl Generator for MockGenerator {
    fn backend_id(&self) -> &str {
        "mock"
    }

    async fn generate(&self, req: &GenerationRequest) -> Result<Generated, GenerationError> {
        self.generate_sync(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::GenerationParams;

    fn req(target: TargetSection) -> GenerationRequest {
        GenerationRequest {
            hadm_id: "H1".into(),
            target,
            prompt: "p".into(),
            params: GenerationParams::default(),
        }
    }

    #[test]
    fn canned_text_and_missing_entry() {
        let g = MockGenerator::new(BTreeMap::from([(
            TargetSection::DischargeInstructions,
            "rest and hydrate".to_string(),
        )]));
        let di = req(TargetSection::DischargeInstructions);
        assert_eq!(g.generate_sync(&di).unwrap().text, "rest and hydrate");
        assert_eq!(g.generate_sync(&di).unwrap(), g.generate_sync(&di).unwrap());
        assert!(matches!(
            g.generate_sync(&req(TargetSection::BriefHospitalCourse)),
            Err(GenerationError::Config(_))
        ));
    }
}
