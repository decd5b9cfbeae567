/**
 * Real masked-LM backend over transformers.js (@huggingface/transformers).
 *
 * The dependency is opt-in (`npm install @huggingface/transformers`)
 * because it ships ONNX runtimes and downloads model weights on first
 * use. Each answer word is masked wholly: the word's BPE pieces are all
 * replaced by <mask> and its log-likelihood is the sum of the true
 * pieces' log-probabilities at those positions.
 */

import { MlmBackend, TooLongError, WordScores } from "./protocol.js";

type Tensor = { data: Float32Array | number[]; dims: number[] };

export class RobertaBackend implements MlmBackend {
  readonly name: string;
  private tokenizer: any;
  private model: any;
  private extractor: any | null = null;
  private readonly modelId: string;
  private readonly maxLength: number;

  private constructor(modelId: string, tokenizer: any, model: any, maxLength: number) {
    this.modelId = modelId;
    this.name = modelId;
    this.tokenizer = tokenizer;
    this.model = model;
    this.maxLength = maxLength;
  }

  static async load(modelId = "roberta-base"): Promise<RobertaBackend> {
    const tf = await import("@huggingface/transformers");
    const tokenizer = await tf.AutoTokenizer.from_pretrained(modelId);
    const model = await tf.AutoModelForMaskedLM.from_pretrained(modelId, { dtype: "fp32" });
    const maxLength = Number(tokenizer.model_max_length) || 512;
    return new RobertaBackend(modelId, tokenizer, model, maxLength);
  }

  private encode(text: string, leadingSpace: boolean): number[] {
    const ids = this.tokenizer.encode(leadingSpace ? ` ${text}` : text, {
      add_special_tokens: false,
    });
    return Array.from(ids, Number);
  }

  private specialIds() {
    const bos = Number(this.tokenizer.bos_token_id ?? this.tokenizer.cls_token_id);
    const eos = Number(this.tokenizer.eos_token_id ?? this.tokenizer.sep_token_id);
    const mask = Number(this.tokenizer.mask_token_id);
    return { bos, eos, mask };
  }

  async scoreAnswer(passage: string, question: string, answer: string): Promise<WordScores> {
    const tf = await import("@huggingface/transformers");
    const words = answer.trim().split(/\s+/);
    const { bos, eos, mask } = this.specialIds();
    const passageIds = this.encode(passage, false);
    const questionIds = this.encode(question, false);
    const wordPieces = words.map((word, index) => this.encode(word, index > 0));

    const wordLogliks: number[] = [];
    for (let w = 0; w < words.length; w++) {
      const answerIds: number[] = [];
      const maskedPositions: number[] = [];
      for (let k = 0; k < words.length; k++) {
        for (const piece of wordPieces[k]) {
          if (k === w) {
            maskedPositions.push(answerIds.length);
            answerIds.push(mask);
          } else {
            answerIds.push(piece);
          }
        }
      }
      const prefix = [bos, ...passageIds, eos, ...questionIds, eos];
      const inputIds = [...prefix, ...answerIds, eos];
      if (inputIds.length > this.maxLength) {
        throw new TooLongError();
      }
      const ids = new tf.Tensor(
        "int64",
        BigInt64Array.from(inputIds.map((v) => BigInt(v))),
        [1, inputIds.length],
      );
      const attention = new tf.Tensor(
        "int64",
        BigInt64Array.from(inputIds.map(() => 1n)),
        [1, inputIds.length],
      );
      const output = await this.model({ input_ids: ids, attention_mask: attention });
      const logits = output.logits as Tensor;
      const [, seqLen, vocab] = logits.dims;
      let loglik = 0;
      for (let p = 0; p < maskedPositions.length; p++) {
        const position = prefix.length + maskedPositions[p];
        if (position >= seqLen) throw new Error("masked position out of range");
        const row = logits.data.slice(position * vocab, (position + 1) * vocab) as Float32Array;
        loglik += logRowProb(row, wordPieces[w][p]);
      }
      wordLogliks.push(loglik);
    }
    return { words, wordLogliks };
  }

  async embed(text: string): Promise<number[][]> {
    if (this.extractor === null) {
      const tf = await import("@huggingface/transformers");
      this.extractor = await tf.pipeline("feature-extraction", this.modelId);
    }
    const output = await this.extractor(text, { pooling: "none" });
    const [tokens, dim] = output.dims.slice(-2);
    const data = output.data as Float32Array;
    const rows: number[][] = [];
    // drop the <s> and </s> rows; normalize the rest
    for (let t = 1; t < tokens - 1; t++) {
      const row = Array.from(data.slice(t * dim, (t + 1) * dim), Number);
      let normSq = 0;
      for (const v of row) normSq += v * v;
      const norm = Math.sqrt(normSq) || 1;
      rows.push(row.map((v) => v / norm));
    }
    return rows;
  }
}

function logRowProb(row: Float32Array, tokenId: number): number {
  let max = -Infinity;
  for (const v of row) if (v > max) max = v;
  let sum = 0;
  for (const v of row) sum += Math.exp(v - max);
  return row[tokenId] - max - Math.log(sum);
}
