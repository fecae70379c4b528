#pragma once

#include <string_view>

// Prompt segments sent to the sentiment backend. The byte content of these
// segments is frozen: downstream caching keys on the hash of the assembled
// prompt, so any edit here invalidates every cached response.

namespace carescope::prompt_text {

inline constexpr std::string_view kIntro =
    R"SEG(### Sentiment Scoring of Patient Experience in Medical Care

Patient experience in medical care collected from Google Maps will be analyzed and categorized based on the following five key aspects. Each review will be classified as **positive, negative, or neutral** depending on the sentiment expressed in relation to these aspects:

**1. Interpersonal Factors**
- Features of the way in which providers interact personally with patients (e.g., concern, friendliness, courtesy, disrespect, rudeness).
- **Positive**: Empathy, kindness, active listening, respectful communication, friendliness, professionalism.
- **Negative**: Rudeness, indifference, lack of communication, dismissiveness, impatience, unprofessional behavior.
- **Neutral**: No clear sentiment, factual statements without strong emotional cues.

**2. Technical Quality**
- Competence of providers and adherence to high standards of diagnosis and treatment (e.g., thoroughness, accuracy, unnecessary risks, making mistakes).
- **Positive**: Accurate diagnosis, effective treatment, thorough examinations, expert medical knowledge, advanced technology use.
- **Negative**: Misdiagnosis, ineffective treatment, lack of expertise, medical errors, outdated procedures.
- **Neutral**: Descriptive statements without emotional judgment.

**3. Operational Efficiency**
- The results of medical care encounters (e.g., helpfulness of medical care providers in improving or maintaining health).
- **Positive**: Short waiting times, smooth appointment scheduling, efficient emergency response, streamlined administrative processes.
- **Negative**: Long wait times, disorganized processes, difficulty booking appointments, lack of coordination among staff.
- **Neutral**: Statements that report processes without clear sentiment.

**4. Finances**
- Factors involved in paying for medical services (e.g., reasonable costs, alternative payment arrangements, comprehensiveness of insurance coverage).
- **Positive**: Reasonable pricing, transparent billing, flexible payment options, adequate insurance coverage, financial assistance programs.
- **Negative**: High costs, hidden fees, billing errors, lack of insurance support, unexpected medical expenses.
- **Neutral**: Mentions of pricing or payment without emotional context.

**5. Facilities/Availability**
- Presence of medical care resources (e.g., enough hospital facilities and providers in the area).
- **Positive**: Clean and well-maintained facilities, modern medical equipment, comfortable waiting areas, availability of essential services (e.g., pharmacies, parking).
- **Negative**: Unhygienic conditions, outdated or broken equipment, lack of beds, overcrowding, poor accessibility for disabled individuals.
- **Neutral**: Observations about facilities without sentiment.

Each review will be assessed based on these five aspects to provide a structured sentiment analysis of patient experiences in healthcare settings.)SEG";

inline constexpr std::string_view kQuestion =
    R"SEG(Can you identify the aspect-based sentiment (i.e., positive, neutral, negative) based on the patient experience stated in the following Google Maps review? Only use the following aspects: Interpersonal Factors, Technical Quality, Operational Efficiency, Finances, Facilities/Availability. Do NOT create new aspects. If the review does not mention an aspect, do not include it in the output.

### Example 1
Review: 'The doctor was very kind and took the time to explain everything to me in detail. The diagnosis was accurate, and I felt well cared for. The clinic was also clean and comfortable.'
Expected Output:
{
  "Interpersonal Factors": "positive",
  "Technical Quality": "positive",
  "Facilities/Availability": "positive"
}

### Example 2
Review: 'I had to wait for more than three hours even though I had an appointment. The staff was rude and unhelpful. Also, the bill had extra charges that were not explained to me.'
Expected Output:
{
  "Interpersonal Factors": "negative",
  "Operational Efficiency": "negative",
  "Finances": "negative"
}
)SEG";

// The review body is spliced into kTextTemplate at kReviewPlaceholder.
inline constexpr std::string_view kTextTemplate = R"SEG(The review content is: {review}
)SEG";
inline constexpr std::string_view kReviewPlaceholder = "{review}";

inline constexpr std::string_view kOutput =
    R"SEG(Please provide only a valid JSON response without Markdown code blocks, text descriptions, or explanations. 
The JSON structure must strictly follow this format:
{
  "Interpersonal Factors": "sentiment", 
  "Technical Quality": "sentiment", 
  "Operational Efficiency": "sentiment", 
  "Finances": "sentiment", 
  "Facilities/Availability": "sentiment"
}
Use only "positive", "negative", or "neutral" as sentiment values. 
If an aspect is not mentioned in the review, do not include it in the output.
If the review does not mention any of the defined aspects, return this exact JSON response: {"None": "None"}.)SEG";

}  // namespace carescope::prompt_text
