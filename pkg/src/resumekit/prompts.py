"""The versioned parsing instruction.

The exact same string is baked into exported training lines and sent as
the system message at inference time, so fine-tuned and base models see
identical task framing. Bump INSTRUCTION_VERSION whenever the wording
changes; exported datasets record the version in their manifests.
"""

INSTRUCTION_VERSION = "1"

PARSING_INSTRUCTION = (
    "Extract the candidate information from the resume text and return it as a "
    "single JSON object with exactly these keys in this order: name, email, phone, "
    "skills, experience, education, department. skills is a list of strings. "
    "experience is a list of objects with keys title, company, start_date, "
    "end_date, description. education is a list of objects with keys degree, "
    "institution, end_date. Dates use YYYY-MM or YYYY; an ongoing position uses "
    "\"present\" as its end_date. Use an empty string for any unknown scalar value "
    "and an empty list for any absent section. Respond with the JSON object only, "
    "no explanations and no markdown."
)
