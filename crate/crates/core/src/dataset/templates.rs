//! Prompt/answer templates for the four fine-tuning tasks and strict parsers
//! for every string they produce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codec::{encode_direction, parse_bin, DirectionCode};
use super::{ManipPose, PromptRecord, Task};
use crate::affordance::PixelSample;
use crate::scene::Category;
use crate::{seed, Error, Result};

pub const OCI_PROMPT: &str = "What is the category of the object in the image?";
pub const APR_PROMPT: &str =
    "Determine if operating on each following point can effectively manipulate the object within the image: ";
pub const APR_SINGLE_PROMPT: &str =
    "Determine if operating on the following point can effectively manipulate the object within the image: ";
pub const FT_PROMPT: &str =
    "Specify the contact point and gripper direction of manipulating the object.";
pub const MASK_TOKEN: &str = "[MASK]";

const FT_CONTACT: &str = "The contact point is ";
const FT_UP: &str = ", the gripper up direction is ";
const FT_FORWARD: &str = ", and the gripper forward direction is ";

/// Field group hidden in a masked-language-modeling prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskField {
    Contact,
    Up,
    Forward,
}

impl MaskField {
    pub const ALL: [MaskField; 3] = [MaskField::Contact, MaskField::Up, MaskField::Forward];
}

/// Pose as it appears in an answer string: pixel plus quantized directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseText {
    pub contact_px: (u32, u32),
    pub up: DirectionCode,
    pub forward: DirectionCode,
}

impl PoseText {
    pub fn from_pose(pose: &ManipPose) -> Self {
        Self {
            contact_px: pose.contact_px,
            up: encode_direction(&pose.up_dir),
            forward: encode_direction(&pose.forward_dir),
        }
    }

    fn groups(&self) -> [String; 3] {
        let (x, y) = self.contact_px;
        [
            format!("({x}, {y})"),
            self.up.format(),
            self.forward.format(),
        ]
    }

    fn render(&self, mask: Option<MaskField>) -> String {
        let mut g = self.groups();
        if let Some(m) = mask {
            let k = MaskField::ALL.iter().position(|&f| f == m).unwrap();
            g[k] = MASK_TOKEN.to_string();
        }
        format!("{FT_CONTACT}{}{FT_UP}{}{FT_FORWARD}{}", g[0], g[1], g[2])
    }

    /// The full pose answer sentence.
    pub fn answer(&self) -> String {
        self.render(None)
    }
}

fn format_points(points: &[(u32, u32)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("({x}, {y})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn make_oci(category: Category) -> PromptRecord {
    let mut r = PromptRecord::new(Task::Oci, OCI_PROMPT.to_string(), category.to_string());
    r.meta.loss_bearing = false;
    r.meta.category = Some(category);
    r
}

/// Affordance question over `n` positives then `n` negatives, answered
/// with `n` "yes" followed by `n` "no".
pub fn make_apr(sample: &PixelSample) -> Result<PromptRecord> {
    let n = sample.positives.len();
    if n == 0 || sample.negatives.len() != n {
        return Err(Error::InvalidParams(format!(
            "affordance sample needs n >= 1 positives and as many negatives, got {} and {}",
            n,
            sample.negatives.len()
        )));
    }
    let points: Vec<_> = sample
        .positives
        .iter()
        .chain(&sample.negatives)
        .copied()
        .collect();
    let prompt = format!("{APR_PROMPT}{}", format_points(&points));
    let answer = std::iter::repeat_n("yes", n)
        .chain(std::iter::repeat_n("no", n))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(PromptRecord::new(Task::Apr, prompt, answer))
}

pub fn make_ft(pose: &ManipPose) -> PromptRecord {
    PromptRecord::new(
        Task::Ft,
        FT_PROMPT.to_string(),
        PoseText::from_pose(pose).answer(),
    )
}

/// Picks the masked field group uniformly from `mask_seed`.
pub fn mask_field_for_seed(mask_seed: u64) -> MaskField {
    MaskField::ALL[seed::rng(mask_seed).random_range(0..3)]
}

/// Pose sentence with one field group masked appended to the pose prompt;
/// the answer is the unmasked sentence.
pub fn make_mlm(pose: &ManipPose, mask_seed: u64) -> PromptRecord {
    let text = PoseText::from_pose(pose);
    let field = mask_field_for_seed(mask_seed);
    let prompt = format!("{FT_PROMPT} {}", text.render(Some(field)));
    let mut r = PromptRecord::new(Task::Mlm, prompt, text.answer());
    r.meta.masked = Some(field);
    r
}

/// Single-point assessment used when re-checking a proposed contact.
pub fn make_assessment(contact_px: (u32, u32), effective: bool) -> (String, String) {
    let (x, y) = contact_px;
    (
        format!("{APR_SINGLE_PROMPT}({x}, {y})"),
        if effective { "yes" } else { "no" }.to_string(),
    )
}

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self { rest: text }
    }

    fn err(&self, what: &str) -> Error {
        let shown: String = self.rest.chars().take(24).collect();
        Error::Parse(format!("expected {what} at `{shown}`"))
    }

    fn literal(&mut self, lit: &str) -> Result<()> {
        self.rest = self
            .rest
            .strip_prefix(lit)
            .ok_or_else(|| self.err(&format!("`{lit}`")))?;
        Ok(())
    }

    fn try_literal(&mut self, lit: &str) -> bool {
        match self.rest.strip_prefix(lit) {
            Some(r) => {
                self.rest = r;
                true
            }
            None => false,
        }
    }

    fn token(&mut self, stop: &[char]) -> &'a str {
        let end = self
            .rest
            .find(|c: char| stop.contains(&c))
            .unwrap_or(self.rest.len());
        let (tok, rest) = self.rest.split_at(end);
        self.rest = rest;
        tok
    }

    fn uint(&mut self) -> Result<u32> {
        let tok = self.token(&[',', ')']);
        if tok.is_empty()
            || !tok.bytes().all(|b| b.is_ascii_digit())
            || (tok.len() > 1 && tok.starts_with('0'))
        {
            return Err(self.err("an unsigned integer"));
        }
        tok.parse().map_err(|_| self.err("an unsigned integer"))
    }

    fn bin(&mut self) -> Result<i32> {
        let tok = self.token(&[',', ')']);
        parse_bin(tok)
            .ok_or_else(|| Error::Parse(format!("`{tok}` is not a two-decimal bin value")))
    }

    fn point(&mut self) -> Result<(u32, u32)> {
        self.literal("(")?;
        let x = self.uint()?;
        self.literal(", ")?;
        let y = self.uint()?;
        self.literal(")")?;
        Ok((x, y))
    }

    fn direction(&mut self) -> Result<DirectionCode> {
        self.literal("(")?;
        let a = self.bin()?;
        self.literal(", ")?;
        let b = self.bin()?;
        self.literal(", ")?;
        let c = self.bin()?;
        self.literal(")")?;
        Ok(DirectionCode { bins: [a, b, c] })
    }

    fn end(&self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(self.err("end of text"))
        }
    }
}

pub fn parse_oci_answer(answer: &str) -> Result<Category> {
    answer.parse()
}

pub fn parse_apr_prompt(prompt: &str) -> Result<Vec<(u32, u32)>> {
    let mut c = Cursor::new(prompt);
    c.literal(APR_PROMPT)?;
    let mut points = vec![c.point()?];
    while c.try_literal(", ") {
        points.push(c.point()?);
    }
    c.end()?;
    Ok(points)
}

/// Yes/no verdicts in order.
pub fn parse_apr_answer(answer: &str) -> Result<Vec<bool>> {
    answer
        .split(", ")
        .map(|w| match w {
            "yes" => Ok(true),
            "no" => Ok(false),
            other => Err(Error::Parse(format!("`{other}` is neither yes nor no"))),
        })
        .collect()
}

pub fn parse_assessment_prompt(prompt: &str) -> Result<(u32, u32)> {
    let mut c = Cursor::new(prompt);
    c.literal(APR_SINGLE_PROMPT)?;
    let p = c.point()?;
    c.end()?;
    Ok(p)
}

pub fn parse_ft_answer(answer: &str) -> Result<PoseText> {
    let mut c = Cursor::new(answer);
    c.literal(FT_CONTACT)?;
    let contact_px = c.point()?;
    c.literal(FT_UP)?;
    let up = c.direction()?;
    c.literal(FT_FORWARD)?;
    let forward = c.direction()?;
    c.end()?;
    Ok(PoseText {
        contact_px,
        up,
        forward,
    })
}

/// Parses a masked prompt, returning the masked field and the visible
/// groups (the masked one as `None`).
pub fn parse_mlm_prompt(prompt: &str) -> Result<(MaskField, [Option<String>; 3])> {
    let mut c = Cursor::new(prompt);
    c.literal(FT_PROMPT)?;
    c.literal(" ")?;
    c.literal(FT_CONTACT)?;
    let mut groups: [Option<String>; 3] = [None, None, None];
    let mut masked = None;
    let seps = [FT_UP, FT_FORWARD, ""];
    for (k, sep) in seps.iter().enumerate() {
        if c.try_literal(MASK_TOKEN) {
            if masked.is_some() {
                return Err(Error::Parse("more than one masked field".into()));
            }
            masked = Some(MaskField::ALL[k]);
        } else {
            let start = c.rest;
            if k == 0 {
                c.point()?;
            } else {
                c.direction()?;
            }
            groups[k] = Some(start[..start.len() - c.rest.len()].to_string());
        }
        c.literal(sep)?;
    }
    c.end()?;
    let masked = masked.ok_or_else(|| Error::Parse("no masked field".into()))?;
    Ok((masked, groups))
}

/// Restores a masked prompt's sentence using the answer: the result must
/// equal the answer exactly.
pub fn unmask(prompt: &str, answer: &str) -> Result<String> {
    let (_, groups) = parse_mlm_prompt(prompt)?;
    let full = parse_ft_answer(answer)?;
    let truth = full.groups();
    for (k, g) in groups.iter().enumerate() {
        if let Some(g) = g {
            if *g != truth[k] {
                return Err(Error::Parse(format!(
                    "visible group {k} disagrees with the answer"
                )));
            }
        }
    }
    Ok(full.render(None))
}

/// Checks a record's prompt and answer against its task grammar.
pub fn validate_record(r: &PromptRecord) -> Result<()> {
    match r.task {
        Task::Oci => {
            if r.prompt != OCI_PROMPT {
                return Err(Error::Parse("unexpected category prompt".into()));
            }
            parse_oci_answer(&r.answer)?;
        }
        Task::Apr => {
            let points = parse_apr_prompt(&r.prompt)?;
            let verdicts = parse_apr_answer(&r.answer)?;
            let n = points.len() / 2;
            if points.len() % 2 != 0 || verdicts.len() != points.len() {
                return Err(Error::Parse(
                    "affordance answer does not match its points".into(),
                ));
            }
            if verdicts[..n].iter().any(|&v| !v) || verdicts[n..].iter().any(|&v| v) {
                return Err(Error::Parse(
                    "affordance answer is not n yes then n no".into(),
                ));
            }
        }
        Task::Ft => {
            if r.prompt != FT_PROMPT {
                return Err(Error::Parse("unexpected pose prompt".into()));
            }
            parse_ft_answer(&r.answer)?;
        }
        Task::Mlm => {
            if unmask(&r.prompt, &r.answer)? != r.answer {
                return Err(Error::Parse(
                    "masked prompt does not restore to the answer".into(),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};

    fn pose() -> ManipPose {
        ManipPose {
            contact_px: (100, 120),
            contact_3d: Point3::new(0.1, 0.2, 0.3),
            up_dir: Vector3::new(0.0, 0.0, 1.0),
            forward_dir: Vector3::new(1.0, 0.0, 0.0),
        }
    }

    #[test]
    fn category_prompt() {
        let r = make_oci(Category::Door);
        assert_eq!(r.prompt, "What is the category of the object in the image?");
        assert_eq!(r.answer, "door");
        assert!(!r.meta.loss_bearing);
        assert_eq!(make_oci(Category::Drawer).answer, "drawer");
        assert!(matches!(
            parse_oci_answer("toaster"),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn affordance_prompt_and_answer() {
        let s = PixelSample {
            positives: vec![(10, 20), (30, 40)],
            negatives: vec![(5, 5), (6, 6)],
        };
        let r = make_apr(&s).unwrap();
        assert_eq!(r.answer, "yes, yes, no, no");
        assert_eq!(
            r.prompt,
            "Determine if operating on each following point can effectively manipulate the object \
             within the image: (10, 20), (30, 40), (5, 5), (6, 6)"
        );
        assert_eq!(
            parse_apr_prompt(&r.prompt).unwrap(),
            vec![(10, 20), (30, 40), (5, 5), (6, 6)]
        );
        let v = parse_apr_answer(&r.answer).unwrap();
        assert_eq!(v.iter().filter(|&&b| b).count(), 2);
        assert_eq!(v.iter().filter(|&&b| !b).count(), 2);
        validate_record(&r).unwrap();

        let empty = PixelSample {
            positives: vec![],
            negatives: vec![],
        };
        assert!(make_apr(&empty).is_err());
    }

    #[test]
    fn pose_answer_text() {
        let r = make_ft(&pose());
        assert_eq!(
            r.answer,
            "The contact point is (100, 120), the gripper up direction is (0.00, 0.00, 1.00), \
             and the gripper forward direction is (1.00, 0.00, 0.00)"
        );
        let back = parse_ft_answer(&r.answer).unwrap();
        assert_eq!(back, PoseText::from_pose(&pose()));
    }

    #[test]
    fn truncated_pose_answers_fail() {
        let answer = make_ft(&pose()).answer;
        for cut in 0..answer.len() {
            assert!(
                parse_ft_answer(&answer[..cut]).is_err(),
                "prefix of length {cut} parsed"
            );
        }
        let missing = answer.replace(
            ", and the gripper forward direction is (1.00, 0.00, 0.00)",
            "",
        );
        assert!(parse_ft_answer(&missing).is_err());
        assert!(parse_ft_answer(&format!("{answer}.")).is_err());
    }

    #[test]
    fn masked_prompt_restores() {
        for seed in 0..30 {
            let r = make_mlm(&pose(), seed);
            let field = r.meta.masked.unwrap();
            assert_eq!(parse_mlm_prompt(&r.prompt).unwrap().0, field);
            assert_eq!(
                unmask(&r.prompt, &r.answer).unwrap(),
                make_ft(&pose()).answer
            );
            validate_record(&r).unwrap();
            if field == MaskField::Up {
                assert!(r.prompt.contains("up direction is [MASK]"));
                assert!(r.answer.contains("up direction is (0.00, 0.00, 1.00)"));
            }
        }
    }

    #[test]
    fn mask_choice_is_uniform() {
        let mut counts = [0usize; 3];
        for s in 0..10_000 {
            let f = mask_field_for_seed(crate::seed::derive(99, s));
            counts[MaskField::ALL.iter().position(|&m| m == f).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn assessment_round_trip() {
        let (p, a) = make_assessment((3, 77), true);
        assert_eq!(
            p,
            "Determine if operating on the following point can effectively manipulate the object \
             within the image: (3, 77)"
        );
        assert_eq!(a, "yes");
        assert_eq!(parse_assessment_prompt(&p).unwrap(), (3, 77));
    }

    #[test]
    fn rejects_malformed_yes_no() {
        assert!(parse_apr_answer("yes, maybe").is_err());
        assert!(parse_apr_answer("yes,no").is_err());
        assert!(parse_apr_prompt(&format!("{APR_PROMPT}(1, 2),(3, 4)")).is_err());
        assert!(parse_apr_prompt(&format!("{APR_PROMPT}(01, 2)")).is_err());
    }
}
