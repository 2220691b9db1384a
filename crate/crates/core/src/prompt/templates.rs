//! Built-in template bodies. Slots are written `[name]`; bracketed text
//! containing commas or quotes is literal.

use super::TemplateId;

const TRIPLET_FORMAT: &str =
    "\n\nRespond with a JSON array of triplets and nothing else, for example:\n\
[[\"entity\", \"attribute\", \"value\"], [\"entity\", \"attribute\", \"value\"]]\n\
Respond with [] if there are none.";

const COT_INSTRUCTIONS: &str = "Instructions:\n\
(1) Identify all precise entities of types in [T] that have associated characteristics.\n\
(2) For each entity, extract:\n\
- Entity: The name or title\n\
- Attribute: The key property\n\
- Value: The associated value (numerical, adjective, or noun phrase)\n\
Formatting:\n\
- Format exactly: [entity, attribute, value]";

pub(super) fn builtin(id: TemplateId) -> String {
    match id {
        TemplateId::ZeroShotExtraction => format!(
            "You are an expert in information extraction. Extract all (entity, attribute, value) triplets from the document.\n\
Here is the Provided Document: [document]{TRIPLET_FORMAT}"
        ),
        TemplateId::RootAttributeInduction => "You are a helpful information extraction assistant.\n\
Can you summarize a category name for the following values?\n\
[attributes]\n\n\
Respond with the category name only, as a JSON string, for example: \"Category Name\""
            .to_string(),
        TemplateId::ValueExtraction => "You are a helpful information extraction assistant.\n\
Can you extract all values (exact text spans, with units) under [document] for each attribute in [root attribute]?\n\n\
Respond with a JSON object mapping each attribute to the list of values found for it, and nothing else, for example:\n\
{\"attribute\": [\"value\", \"value\"]}"
            .to_string(),
        TemplateId::ValueGuidedExtraction => format!(
            "You are an expert information extraction assistant.\n\
Given Document: [document]\n\
Value: [value]\n\
Value type: [root attribute]\n\
The value is an exact text span from the document. Identify the entity it describes and the attribute whose value it is, \
consistent with the value type.{TRIPLET_FORMAT}"
        ),
        TemplateId::MdqaGenerate => "You are a helpful question answering assistant.\n\
Given a <entity, attribute, value> triplet, generate three questions where each question asks for one component using only the other two as context.\n\
Do not infer or hallucinate new information.\n\
Triplet: [triplet]\n\
Context: [context]\n\n\
Respond with a JSON array of exactly three strings and nothing else: the question asking for the entity, \
then the question asking for the attribute, then the question asking for the value."
            .to_string(),
        TemplateId::MdqaAnswer => "You are a helpful question answering assistant.\n\
Please answer the following questions using answers extracted from the context.\n\
Context: [context]\n\
Question 1: [Q_entity]\n\
Question 2: [Q_attribute]\n\
Question 3: [Q_value]\n\n\
Respond with a JSON array of exactly three answer strings, in question order, and nothing else."
            .to_string(),
        TemplateId::TripletRefinement => format!(
            "There is a <entity, attribute, value> triplet extracted from the context.\n\
The original triplet may cause ambiguity due to an incomplete entity or a non-informative attribute.\n\
Refine the given triplet by extracting exact information from the context, such that the attribute is a clear property of the entity.\n\
Context: [context]\n\
Triplet: [triplet]\n\
Keep the value anchored on: [value]{TRIPLET_FORMAT}"
        ),
        TemplateId::StructureConstruction => "For a given list of (entity, attribute, value) triplets and a context, merge triplets referring to the same entity into structured objects.\n\
Follow this format:\n\
{\"entity name\": {\"attribute\": \"value\", ...}, ...}\n\
Context: [document]\n\
Triplets: [triplets]\n\n\
Respond with the JSON object only."
            .to_string(),
        TemplateId::TypeFiltration => "You are a helpful assistant. For a given entity with its attribute and values, can you decide whether the entity belongs to any given entity types based on the context. \
The given context is: [Context]. The given triplets are [Triplets]. The given entity types are: [Entity Type]. Response \"Yes\" or \"No\"."
            .to_string(),
        TemplateId::CotExtraction => format!(
            "You are an expert in information extraction.\n{COT_INSTRUCTIONS}\n\
Document: [document]{TRIPLET_FORMAT}"
        ),
        TemplateId::FewshotExtraction => format!(
            "You are an expert in information extraction.\n{COT_INSTRUCTIONS}\n\
In addition, you are given:\n\
Demonstrations: [Demonstrations]\n\
Document: [document]{TRIPLET_FORMAT}"
        ),
        TemplateId::AnswerJudge => "You are a helpful assistant. Given a context, decide whether two answers to the same question refer to the same information.\n\
Context: [context]\n\
Answer A: [predicted]\n\
Answer B: [gold]\n\
Response \"Yes\" or \"No\"."
            .to_string(),
    }
}
