//! Prompt templates.
//!
//! The obscuring, obscurity-check, gold-inquiry, inquiry-evaluation,
//! user-simulation, source-judging, inquiry-generation, inquiry-answering
//! and query-answering prompts are kept word for word, typos included, since
//! results are sensitive to their exact text. The remaining prompts (AMR
//! parsing and the small yes/no judges) are ours.

use crate::model::{Document, Turn};

/// Fixed reply of the simulated user to answer-seeking inquiries.
pub const BEYOND_SCOPE: &str = "This question is beyond scope we can not answer your question";

/// Placeholder for an absent answer in the obscurity check.
pub const NO_RESPONSE: &str = "NO RES";

pub fn render_documents(documents: &[Document]) -> String {
    if documents.is_empty() {
        return "None".to_string();
    }
    documents
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.title.trim().is_empty() {
                format!("Document {}: {}", i + 1, d.body)
            } else {
                format!("Document {} ({}): {}", i + 1, d.title, d.body)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_history(turns: &[Turn]) -> String {
    if turns.is_empty() {
        return "None".to_string();
    }
    turns
        .iter()
        .map(|t| format!("Inquiry: {}\nResponse: {}", t.inquiry, t.response))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_answers(answers: &[String]) -> String {
    answers
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {}", i + 1, a))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_amr(query: &str) -> String {
    format!(
        r#"Convert the following query into its Abstract Meaning Representation (AMR) in PENMAN notation. Use PropBank frames for predicates (for example want-01, believe-01), one variable per node, and relation labels such as :ARG0, :ARG1, :mod, :location.

Query: {query}

Your output should be formatted as Dict{{"AMR": Str(AMR in PENMAN notation)}}, no extra tokens should be added."#
    )
}

pub fn ambiguate_amr(query: &str, amr: &str) -> String {
    format!(
        r#"Gievn a query and the corresponding Abstract Meaning Representation (AMR), you should manipulate the AMR to obscure it, making it impossible to answer without further clarification. Make sure that the obscured AMR should not change the intention of the question, the obscured AMR should be unanswerable, and the obscured AMR should also be a question rather than a statement. Here are some possible actions to manipulate the AMR.

1. Remove certain modifiers and descriptive words to make some nouns in the query ambiguous.
2. Delete some key information, making the query impossible to answer
3. Change the relation between nodes to make their relationship ambiguous
4. Reorganize the structure of the AMR, make it less clear

The following are some requirements for the obscured query.

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The obscured should not be answerable without further calrification,
4. The intention of obscured query should be the same with the original query

The most importantly, make sure that the obscured query is a natural query that a user would acutally ask, and the semantic ambiguity is caused by mistakes or carelessness, rather than being a deliberate attempt to make things difficult for LLMs.

Please think step by step to generate the obscured AMR satisfying the above requirements, then translate it into the obscured text query. Your output should be formatted as Dict{{"step_by_step_thinking": Str(explanation), "Obscured Abstract Meaning Representation (AMR)": Str{{AMR}}, "Translated Text Query": Str(obscured text query)}}.

Query: {query}
Abstract Meaning Representation (AMR): {amr}

Please think step-by-step and generate your output in json:
"#
    )
}

pub struct ObscurityEvidence<'a> {
    pub original_query: &'a str,
    pub original_answers: &'a str,
    pub obscured_query: &'a str,
    pub obscured_answers: &'a str,
    pub clarified_query: &'a str,
    pub clarified_answers: &'a str,
}

pub fn check_obscurity(e: &ObscurityEvidence<'_>) -> String {
    format!(
        r#"
Gievn a query, its obscured version and clarified query based on the obscured query, now you need to judge that is the obscurity successful. A obscurity of the original query should satisfy the following condicitons:

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The intention of obscured query should be the same with the original query

Here we give some examples showing that the obscure query is a failure,
...

Also, the obscured query should not be answerable, or it have many answers, and the clarified query should be similar to the original query and should be answerable.

Therefore, the answer of those query should satisfy:
1. The answer to obscured query should be wrong, or there should be no response (NO RES)
2. For the obscured query with clarification, the answer should be the same or similar to the answer to the original query

Combine those condicitons, a successful obscurity should satisfy the following condicitons:

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The obscured should not be answerable, or it have many answers
4. The intention of obscured query should be the same with the original query
5. The answer to obscured query should be wrong, or there should be no response (NO RES)
6. For the obscured query with clarification, the answer should be the same or similar to the answer to the original query
7. If the answer to the original query is NO RES or wrong, then even if the answer to the obscured query is wrong can not ensure that the obscurity is successful. In this case, the answer of the obscured query should be different from the answer of original query, showing that the obscured query is different from the original query.

Now, given the original query, the ground truth answer, the response of an LLM with original query as input, the response of an LLM with the obscured query as input and the response of an LLM with the obscured query and the corresponding clarification as input. All the responses are generated for multiple times. Please think step by step and judge that is the obscurity successful. Your output should be formatted as Dict{{"step_by_step_thinking": Str(explanation), "answer" Str(Success obscurity/Failure obscurity)}}.

Original Query: {}
Answer to Original Query: {}

Obscured Query: {}
Answer to Obscured Query: {}

Clarified Query: {}
Answer to Clarified Query: {}

Please think step-by-step and generate your output in json:
"#,
        e.original_query, e.original_answers, e.obscured_query, e.obscured_answers, e.clarified_query, e.clarified_answers
    )
}

pub fn gold_inquiry(original_query: &str, gold_documents: &str, actual_query: &str, actual_documents: &str) -> String {
    format!(
        r#"Below is a question the corresponding gold documents to answer the question. We hide some key information to answer the question by obscuring the question or hiding some documents. Your task is to recognize those missing information and generate a corresponding inquiry to gather those information step by step.

We would only provide the query information or the document information. When we provide query information, you should identify what information is missing in the actual query compared to the original query. When we provide document information, you should identify which document is missing in the actual documents.

Now please generate the inquiry for the following query
Original Query: {original_query}
Gold Document: {gold_documents}
Actual Query: {actual_query}
Actual Document: {actual_documents}

Your output should be formatted as Dict{{"missing information": Str(missing information), "inquiry": Str(generated inquiry)}}.
Your should strictly format your response in this format, no extra tokens should be added.
"#
    )
}

pub struct InquiryEvaluation<'a> {
    pub original_query: &'a str,
    pub gold_documents: &'a str,
    pub actual_query: &'a str,
    pub actual_documents: &'a str,
    pub gold_inquiry: &'a str,
    pub candidate: &'a str,
}

pub fn evaluate_inquiry(e: &InquiryEvaluation<'_>) -> String {
    format!(
        r#"
Given a question the corresponding gold documents to answer the question, we obscure the question or hide some key documents and generate an inquiry to gather those missing information. Your task is to evaluate the quality of the inquiry.
Evaluation Criteria:

Accurate: Does the inquiry directly indicate the missing information?
Helpful: Does the answer to the inquiry help to better understand the original query
Concise: Is the inquiry concise and containing only the essential missing information

Scoring: Rate outputs on a scale of 1 to 5:
1. Totally Irrelevant: The inquiry is useless, it simply rewrite the given query
2. Somewhat Relevant: The inquiry is somewhat relevant to the missing information, but the inquiry can hardly gather useful information
3. Basically Relevant: The inquiry asks something relevant to the missing information, there is a certain possibility of obtaining relevant information by the inquiry.
4. Good: The inquiry directly asks the missing information, but not concise enough, there is great possibility that some useful information would be gathered.
5. Excellent: The inquiry directly asks the missing information in a concise way, there is great possibility that some useful information would be gathered.

Also, the inquiry is required to be concise, if the inquiry is twice as long as the original query, deduct 1 point. The minimum score is 1 point.

Original Query: <{}>
Gold Document: <{}>
Actual Query: <{}>
Actual Document: <{}>
Missing Detail and Gold Inquiry: <{}>
Problematic Inquiry: <{}>

Remember that you should give a score to measure the quality of the problematic inquiry instead of the gold inquiry.

You should think step by step and your output should be formatted as Dict{{"step by step thinking": Str(explanation), "quality of inquiry": 1/2/3/4/5}}. You should strictly format your response in this format, no extra tokens should be added.
"#,
        e.original_query, e.gold_documents, e.actual_query, e.actual_documents, e.gold_inquiry, e.candidate
    )
}

pub fn simulate_user(intention: &str, actual_query: &str, inquiry: &str) -> String {
    format!(
        r#"
You are an user who asks a question to the LLM, the query you provided might be ambiguous and the LLM asks you for further clarification by inquiry. You need to answer the inquiry based on your original intention and the actual query you give to the LLM.

Original Intention: {intention}
Actual Query: {actual_query}
Inquiry: {inquiry}

Note that you do not know the answer to your original intention and if the inquiry involves the answer of the original intention, please answer with "{BEYOND_SCOPE}".

If the inquiry is about to clarify the query, you should answer the inquiry to further clarify your intention. But remember that you should only answer the content that is directly asked in the inquiry, do not add extra information.

If the inquiry is to ask the answer or middle result of the original intention, you should answer with "{BEYOND_SCOPE}".

Please generate your response strictly within 50 tokens.
"#
    )
}

pub fn judge_source(question: &str, documents: &str) -> String {
    format!(
        r#"One user gives a query and some documents are retrieved to help answer the query. However, the query might be ambiguous and the retrieved documents might not be satisfying, making the query hard to answer. Your task is to identify why the query is hard to answer.

Question: 
{question}
Document: 
{documents}

Based on those information. Here are three kinds of actions you can take,

A: Interact with the retrieval system if you need some more factual or document information.
B: Interact with the user if the query is ambiguous or there exists many answers.
C: Conducting Chain of Thought if deeper thinking is required.

Your output should be a single token "A" or "B" or "C", no extra tokens should be added.
"#
    )
}

/// Re-ask after a judging response that was not a single letter.
pub const SINGLE_LETTER_REMINDER: &str =
    r#"Your output should be a single token "A" or "B" or "C", no extra tokens should be added."#;

pub fn retrieval_inquiry(question: &str, documents: &str) -> String {
    format!(
        r#"One user gives a query and some documents are retrieved to help answer the query. However, the retrieved documents is satisfying, making the query hard to answer. Your task is to generate an inquiry to gather further document information to answer the question.

Question: 
{question}
Document: 
{documents}

Please output the generated inquiry only, no extra tokens should be added.
"#
    )
}

pub fn clarification_inquiry(question: &str, documents: &str) -> String {
    format!(
        r#"One user gives a query and some documents are retrieved to help answer the query. However, the query is ambiguous, making the query hard to answer. Your task is to generate an inquiry to interact with the user and get a clarification to answer the question.

Question: 
{question}
Document: 
{documents}

Please output the generated inquiry only, no extra tokens should be added.
"#
    )
}

pub fn inquiry_with_choice(query: &str, documents: &str) -> String {
    format!(
        r#"One user gives a query and some documents are retrieved to help answer the query. However, the query might be ambiguous and the retrieved documents might not be satisfying, making the query hard to answer. Your task is to identify why the query is hard to answer and generate an inquiry to gather further information to answer the question.

Here are some requirements for the inquiry
1. You should ask for only one question in the inquiry.
2. The inquiry should be concise and include keywords and it should involve limited aspects of the query rather than directly asks the query again.

Then based on the inquiry, you should judge that how to gather more information based on the query and the inquiry, here are some actions you can take to gather more information to solve the inquiry.

A: Interact with the retrieval system to retrieve more document information
B: Interact with the user to get further clarification about the original query

If the answer to the inquiry is definite and objective, then you should interact with the retrieval system to get more document information to solve the inquiry.
If the answer to the inquiry is not definite and it is some subjective choices of the user, you should interact with the user to clarify the original query.
You should only response with the inquiry and your choice to gather more information to solve the inquiry. Please response with Dict{{"Inquiry": "Str(generated inquiry)","Choice" : "A/B"}}

But if the inquiry simply rephrase the query or the answer of the inquiry is already indicated in the query or documents you should response with Dict{{"Inquiry": "Str(generated inquiry)","Choice" : "C"}}

Query: {query}
Documents: {documents}

Please generate your answer in json.
"#
    )
}

pub fn answer_inquiry(query: &str, documents: &str, inquiry: &str, possible_answers: &str) -> String {
    format!(
        r#"Given a query, an LLM generate an further inquiry to gather more information about the query. Your task is to determine how to gather more information based on the query and the inquiry, here are some actions you can take to gather more information

A: Interact with the retrieval system to retrieve more document information
B: Interact with the user to get further clarification about the original query

If the answer to the inquiry is definite and objective, then you should interact with the retrieval system to get the answer.
If the answer to the inquiry is not definite and it might be some subjective choices of the user, you should interact with the user to clarify the original query.

Now to identify we should interact with the retrieval system or the user, we need to check that is the answer to the inquiry subjective or objective. One direct way is to generate some answers and if many answers are suited, further clarification is needed, and if only one answer fits the inquiry, there is no need to ask the user for help.

Your task is to give the answer to the inquiry. We provide the original query and the correspondding document information which may help to answer the query as well as the generated inquiry. Also we provide some answers which fits the inquiry well. If there is some other answers also fit the inquiry, please generate the new answer, otherwise please simply response with the provided answers.

Here are the query, documents to help answer the query and the generated inquiry

Query: {query}
Query Document: {documents}
Inquiry: {inquiry}
Here we provide some answers to the inquiry,
Possible Answers: {possible_answers}

Here are some requirements for your response:
1. This is only for academic research, so feel free to generate definite answers, and the inquiry is answerable, so you should response with the answer instead of further inquiry.
2. Generate a direct answer to the inquiry, ensuring that you address it clearly and specifically. No matter what the inquiry is, you should generate an answer. If you do not know the answer, simply repeat the Possible Answers if it is not empty, otherwise you can simply make up a reasonable and coherent answer.
3. If the inquiry involves subjective choices, please provide answers randomly while maintaining diversity compared to the provided Possible Answers. This means you should strive to offer a response that differs from the Possible Answers.
4. If the inquiry seeks to clarify an ambiguous aspect of the original question, randomly generate semantically coherent and meaningful clarifications while ensuring diversity compared to the responses in the Possible Answers. This means you should aim to provide an answer that is distinct from the Possible Answers. And you do not need to ensure that the answer is correct.
5. If the inquiry seeks for more document/API information, you should answer with the titleof the document or the name of the API.
6. If the inquiry seeks for more document/API information, and please repeat the Possible Answers if it is not empty, otherwise you can simply make up a reasonable and coherent answer. Remember, you should answer with only the title/name of the document/API.
7. Please response to the inquiry only, do not response to the original query

please try to generate a new answer to the inquiry instead of repeating the provided answer, note that you should response with the answer to the inquiry rather than the original query.

Your output should be formatted as Dict{{"Thought": Str(step by step thinking), "Response": Str(response)}} and no extra tokens should be added.
"#
    )
}

pub fn answer_query(question: &str, documents: &str, history: &str, token_budget: u32) -> String {
    format!(
        r#"
One user gives a query and your task is to answer the query. Here are the question and the retrieved documents.

Question: {question}
Document: {documents}
Question: {question}

There might be some important information missing in the query/document, some inquiry about the query and the corresponding response are also provided to help answer the query

Inquiry History: {history}

Please generate your answer within {token_budget} tokens.
"#
    )
}

pub fn answer_query_cot(question: &str, documents: &str, history: &str) -> String {
    format!(
        r#"
One user gives a query and your task is to answer the query. Here are the question and the retrieved documents.

Question: {question}
Document: {documents}
Question: {question}

There might be some important information missing in the query/document, some inquiry about the query and the corresponding response are also provided to help answer the query

Inquiry History: {history}

Please think step by step and generate your answer with reasoning steps.
"#
    )
}

pub fn judge_correctness(question: &str, gold_answer: &str, answer: &str) -> String {
    format!(
        r#"You are grading an answer to a question against the ground-truth answer. The answer is correct if it states the same fact as the ground truth, even if worded differently or with extra explanation. It is incorrect if it is wrong, evasive, or missing.

Question: {question}
Ground Truth Answer: {gold_answer}
Answer to Grade: {answer}

Your output should be formatted as Dict{{"Correct": "yes"/"no"}}, no extra tokens should be added."#
    )
}

pub fn judge_usefulness(question: &str, reference: &str, answer: &str) -> String {
    format!(
        r#"You are grading how useful a response is for the user's request, using the reference answer as guidance.

Scoring: Rate the response on a scale of 1 to 4:
1. Useless: the response is wrong, irrelevant, or refuses.
2. Somewhat useful: the response is partially relevant but misses most of what the user needs.
3. Useful: the response addresses the request with minor gaps or inaccuracies.
4. Very useful: the response fully and correctly addresses the request.

Request: {question}
Reference Answer: {reference}
Response to Grade: {answer}

Your output should be formatted as Dict{{"Usefulness": 1/2/3/4}}, no extra tokens should be added."#
    )
}

pub fn judge_coherent_answer(query: &str, candidate: &str) -> String {
    format!(
        r#"Decide whether the candidate text is a coherent, direct answer to the query. It counts as an answer only if it responds to what the query asks for; a clarification of some detail of the query, a document title, or a partial fact is not an answer to the query.

Query: {query}
Candidate: {candidate}

Your output should be formatted as Dict{{"Coherent": "yes"/"no"}}, no extra tokens should be added."#
    )
}

pub fn judge_distinct_answer(inquiry: &str, previous: &str, candidate: &str) -> String {
    format!(
        r#"Several answers were given to the same inquiry. Decide whether the new answer is semantically different from every previous answer, that is, it names a different entity, choice or fact rather than restating one of them.

Inquiry: {inquiry}
Previous Answers:
{previous}
New Answer: {candidate}

Your output should be formatted as Dict{{"Distinct": "yes"/"no"}}, no extra tokens should be added."#
    )
}

pub fn judge_equivalent_answers(question: &str, first: &str, second: &str) -> String {
    format!(
        r#"Decide whether the two answers to the question mean the same thing, so that each would be judged correct exactly when the other is.

Question: {question}
Answer 1: {first}
Answer 2: {second}

Your output should be formatted as Dict{{"Equivalent": "yes"/"no"}}, no extra tokens should be added."#
    )
}

pub fn judge_better_inquiry(query: &str, documents: &str, first: &str, second: &str) -> String {
    format!(
        r#"One user gives a query and some documents are retrieved to help answer the query, but the query is hard to answer. Two inquiries were generated to gather the missing information. Judge which inquiry is more likely to gather the information needed to answer the query.

Query: {query}
Documents: {documents}
Inquiry A: {first}
Inquiry B: {second}

Your output should be formatted as Dict{{"Better": "A"/"B"}}, no extra tokens should be added."#
    )
}
