#pragma once

// Generated from templates/{cot,plain}/*.txt; keep byte-identical with those files.

#include <array>
#include <string_view>

namespace steerconf::shipped {

inline constexpr std::array<std::string_view, 5> kCotTemplates = {
    // very_cautious
    R"tpl(Read the question, analyze step by step, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a wrong answer with high confidence. (3) You should be very cautious, and tend to give low confidence on almost all of the answers. 
Use the following format to answer:\```Explanation: [insert step-by-step analysis here]
Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only give me the reply according to this format, don't give me any other words.)tpl",
    // cautious
    R"tpl(Read the question, analyze step by step, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a wrong answer with high confidence. 
Use the following format to answer:\```Explanation: [insert step-by-step analysis here]
Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only give me the reply according to this format, don't give me any other words.)tpl",
    // vanilla
    R"tpl(Read the question, analyze step by step, provide your answer and your confidence in this answer. Note: The confidence indicates how likely you think your answer is true.
Use the following format to answer:
```Explanation: [insert step-by-step analysis here]
Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%
```
Only give me the reply according to this format, don't give me any other words.)tpl",
    // confident
    R"tpl(Read the question, analyze step by step, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a right answer with low confidence. 
Use the following format to answer:\```Explanation: [insert step-by-step analysis here]
Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only give me the reply according to this format, don't give me any other words.)tpl",
    // very_confident
    R"tpl(Read the question, analyze step by step, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a right answer with low confidence. (3) You should be very confident, and tend to give high confidence on almost all of the answers. 
Use the following format to answer:\```Explanation: [insert step-by-step analysis here]
Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only give me the reply according to this format, don't give me any other words.)tpl",
};

inline constexpr std::array<std::string_view, 5> kPlainTemplates = {
    // very_cautious
    R"tpl(Read the question, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a wrong answer with high confidence. (3) You should be very cautious, and tend to give low confidence on almost all of the answers. 
Use the following format to answer:
```Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only the answer and confidence, don't give me the explanation.)tpl",
    // cautious
    R"tpl(Read the question, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true.  (2) You are making important decisions, thus you should avoid giving a wrong answer with high confidence. 
Use the following format to answer:
```Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only the answer and confidence, don't give me the explanation.)tpl",
    // vanilla
    R"tpl(Read the question, provide your answer and your confidence in this answer. Note: The confidence indicates how likely you think your answer is true.
Use the following format to answer:
```Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only the answer and confidence, don't give me the explanation.)tpl",
    // confident
    R"tpl(Read the question, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a right answer with low confidence.
Use the following format to answer:
```Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only the answer and confidence, don't give me the explanation.)tpl",
    // very_confident
    R"tpl(Read the question, provide your answer and your confidence in this answer. Note: (1) The confidence indicates how likely you think your answer will be true. (2) You are making important decisions, thus you should avoid giving a right answer with low confidence. (3) You should be very confident, and tend to give high confidence on almost all of the answers. 
Use the following format to answer:
```Answer and Confidence (0-100): [ONLY the {ANSWER_TYPE}; not a complete sentence], [Your confidence level, please only include the numerical number in the range of 0-100]%```
Only the answer and confidence, don't give me the explanation.)tpl",
};

}  // namespace steerconf::shipped
