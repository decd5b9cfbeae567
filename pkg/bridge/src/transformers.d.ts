// Minimal surface of the optional @huggingface/transformers dependency;
// installed separately, loaded only via dynamic import in roberta.ts.
declare module "@huggingface/transformers" {
  export const AutoTokenizer: any;
  export const AutoModelForMaskedLM: any;
  export const Tensor: any;
  export function pipeline(...args: any[]): Promise<any>;
}
